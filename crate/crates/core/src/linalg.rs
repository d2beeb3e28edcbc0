//! Small dense helpers shared by the reduction and manifold code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric eigendecomposition with eigenvalues ascending.
///
/// Each eigenvector is sign-normalised so that its entry of largest magnitude
/// is positive (first such entry on ties).
pub fn sym_eigen_ascending(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        fix_sign(&mut v);
        vectors.set_column(c, &v);
    }
    (values, vectors)
}

/// Flip `v` so that its largest-magnitude entry is positive.
pub fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 0..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.len() > 0 && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Thin QR with a non-negative diagonal in `R`.
pub fn thin_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for k in 0..r.nrows().min(r.ncols()) {
        if r[(k, k)] < 0.0 {
            r.row_mut(k).neg_mut();
            q.column_mut(k).neg_mut();
        }
    }
    (q, r)
}

/// Solve an upper-triangular system `r x = b`.
pub fn solve_upper(r: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    r.solve_upper_triangular(b)
        .ok_or_else(|| Error::LinearSolve("singular triangular factor".into()))
}

/// Solve a small dense symmetric system, Cholesky first then LU.
pub fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::LinearSolve("singular reduced stiffness".into()))
}

/// Largest absolute entry.
pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Squared Euclidean distance between two columns.
pub fn col_dist2(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    a.column(i)
        .iter()
        .zip(b.column(j).iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Pairwise squared distances between the columns of `x`.
pub fn pairwise_dist2(x: &DMatrix<f64>) -> DMatrix<f64> {
    let s = x.ncols();
    let gram = x.transpose() * x;
    let mut d = DMatrix::zeros(s, s);
    for i in 0..s {
        for j in (i + 1)..s {
            let v = (gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)]).max(0.0);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Largest principal angle (radians) between the column spans of `a` and `b`.
pub fn subspace_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let (qa, _) = thin_qr(a);
    let (qb, _) = thin_qr(b);
    // sin of the largest angle, accurate for tiny angles unlike acos
    let resid = &qb - &qa * (qa.transpose() * &qb);
    let smax = resid.singular_values().iter().cloned().fold(0.0f64, f64::max);
    smax.min(1.0).asin()
}
