use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::thin_qr;

/// Least-squares map from the embedding back to the ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalMap {
    /// `ψ = U Ycᵀ (Yc Ycᵀ)⁻¹`.
    pub psi: DMatrix<f64>,
    /// Orthonormal factor of `ψ`.
    pub psi_perp: DMatrix<f64>,
}

/// Relative eigenvalue floor below which a reduced Gram matrix counts as singular.
const GRAM_RCOND: f64 = 1e-12;

fn gram_is_singular(g: &DMatrix<f64>) -> bool {
    let ev = g.clone().symmetric_eigenvalues();
    let max = ev.iter().cloned().fold(0.0f64, f64::max);
    let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    !(max > 0.0) || min <= GRAM_RCOND * max
}

/// Global linear map `U ≈ ψ (Y − y₀ 1ᵀ)`.
///
/// `zero_col` selects the column used as the origin of the embedding; `None`
/// fits `U ≈ ψ Y` without centring.
pub fn global_linearise(u: &DMatrix<f64>, y: &DMatrix<f64>, zero_col: Option<usize>) -> Result<GlobalMap> {
    if u.ncols() != y.ncols() {
        return Err(Error::InvalidArgument("U and Y column counts differ".into()));
    }
    let mut yc = y.clone();
    if let Some(c) = zero_col {
        let y0 = y.column(c).into_owned();
        for mut col in yc.column_iter_mut() {
            col -= &y0;
        }
    }
    let g = &yc * yc.transpose();
    if gram_is_singular(&g) {
        return Err(Error::RankDeficientEmbedding);
    }
    let rhs = &yc * u.transpose();
    let psi_t = g.cholesky().ok_or(Error::RankDeficientEmbedding)?.solve(&rhs);
    let psi = psi_t.transpose();
    let (psi_perp, _) = thin_qr(&psi);
    Ok(GlobalMap { psi, psi_perp })
}

/// The `n` columns of `y_all` closest to `y`, nearest first, ties to the
/// lower index.
pub fn nearest_in_reduced(y: &DVector<f64>, y_all: &DMatrix<f64>, n: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = (0..y_all.ncols())
        .map(|j| ((y_all.column(j) - y).norm_squared(), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if n == 0 || n >= d.len() {
        return d.into_iter().take(n).map(|p| p.1).collect();
    }
    // Embeddings can place several snapshots on one point (binary graph
    // weights do this for nodes with identical neighbour sets). Distances
    // equal up to rounding are ties at the cut, broken by index.
    let cut = d[n - 1].0;
    let tol = TIE_RTOL * cut;
    let sure = d.iter().take_while(|p| p.0 < cut - tol).count();
    let mut tied: Vec<usize> = d[sure..].iter().take_while(|p| p.0 <= cut + tol).map(|p| p.1).collect();
    tied.sort_unstable();
    d[..sure].iter().map(|p| p.1).chain(tied.into_iter().take(n - sure)).collect()
}

/// Relative band on squared distances treated as a tie in [`nearest_in_reduced`].
const TIE_RTOL: f64 = 1e-9;

/// Affine least-squares tangent at a reduced point.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTangent {
    /// m×d map `φ`.
    pub phi: DMatrix<f64>,
    /// Orthonormal factor, `φ = φ⊥ R⊥`.
    pub phi_perp: DMatrix<f64>,
    pub r_perp: DMatrix<f64>,
    pub neighbor_ids: Vec<usize>,
    pub y_center: DVector<f64>,
    /// Offset `u⁰` of the affine fit `u ≈ φ y + u⁰`.
    pub offset: DVector<f64>,
}

/// Fit `U_N ≈ φ Y_N + u⁰ 1ᵀ` over the `n` nearest neighbours of `y`.
///
/// Closed form `φ = U_N W Y_Nᵀ (Y_N W Y_Nᵀ)⁻¹` with centring matrix
/// `W = I − 1 1ᵀ / n`.
pub fn local_linearise(y: &DVector<f64>, y_all: &DMatrix<f64>, u: &DMatrix<f64>, n: usize) -> Result<LocalTangent> {
    let d = y_all.nrows();
    if n <= d || n > y_all.ncols() {
        return Err(Error::SingularNeighborhood { n, d });
    }
    let ids = nearest_in_reduced(y, y_all, n);
    let m = u.nrows();
    let mut yn = DMatrix::zeros(d, n);
    let mut un = DMatrix::zeros(m, n);
    for (c, &j) in ids.iter().enumerate() {
        yn.set_column(c, &y_all.column(j));
        un.set_column(c, &u.column(j));
    }
    let y_mean = yn.column_mean();
    let u_mean = un.column_mean();
    let mut yc = yn;
    for mut col in yc.column_iter_mut() {
        col -= &y_mean;
    }
    let g = &yc * yc.transpose();
    if gram_is_singular(&g) {
        return Err(Error::SingularNeighborhood { n, d });
    }
    // φᵀ = G⁻¹ Yc U_Nᵀ; U_N Ycᵀ equals U_N W Y_Nᵀ because W is a projector
    let rhs = &yc * un.transpose();
    let phi = g.cholesky().ok_or(Error::SingularNeighborhood { n, d })?.solve(&rhs).transpose();
    let offset = u_mean - &phi * &y_mean;
    let (phi_perp, r_perp) = thin_qr(&phi);
    Ok(LocalTangent { phi, phi_perp, r_perp, neighbor_ids: ids, y_center: y.clone(), offset })
}
