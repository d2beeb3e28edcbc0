//! Oracles shared by the integration suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn cloud(m: usize, s: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(m, s, |_, _| rng.sample(StandardNormal))
}

/// Ascending eigenpairs from faer, independent of the library's solver.
pub fn faer_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let evd = m.self_adjoint_eigen(faer::Side::Lower).unwrap();
    let vals = (0..n).map(|i| evd.S().column_vector()[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, j| evd.U()[(i, j)]);
    (vals, vecs)
}

/// Affine least squares `[Y_Nᵀ 1] [φᵀ; u⁰ᵀ] = U_Nᵀ` by SVD.
pub fn affine_oracle(y_all: &DMatrix<f64>, u: &DMatrix<f64>, ids: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let d = y_all.nrows();
    let n = ids.len();
    let a = DMatrix::from_fn(n, d + 1, |r, c| if c < d { y_all[(c, ids[r])] } else { 1.0 });
    let b = DMatrix::from_fn(n, u.nrows(), |r, c| u[(c, ids[r])]);
    let x = a.svd(true, true).solve(&b, 1e-14).unwrap();
    (x.rows(0, d).transpose(), x.row(d).transpose())
}

/// Indices sorted by distance to `q`, ties to the lower index.
pub fn brute_neighbours(y_all: &DMatrix<f64>, q: &DVector<f64>, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..y_all.ncols()).collect();
    order.sort_by(|&a, &b| {
        let da = (y_all.column(a) - q).norm();
        let db = (y_all.column(b) - q).norm();
        da.partial_cmp(&db).unwrap().then(a.cmp(&b))
    });
    order.truncate(n);
    order
}
