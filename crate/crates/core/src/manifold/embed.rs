use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::graph::NeighborGraph;
use crate::error::{Error, Result};
use crate::linalg::{fix_sign, sym_eigen_ascending};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMethod {
    Lem,
    Lle,
}

/// Reduced coordinates of the snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// d×s, column `i` embeds snapshot `i`.
    pub y: DMatrix<f64>,
    pub d: usize,
    pub method: EmbeddingMethod,
    /// Eigenvalues of the selected vectors, ascending.
    pub eigenvalues: DVector<f64>,
}

fn check_dim(d: usize, s: usize) -> Result<()> {
    if d == 0 || d >= s {
        return Err(Error::InvalidArgument(format!("embedding dimension must satisfy 1 <= d < s, got d={d}, s={s}")));
    }
    Ok(())
}

/// Laplacian eigenmaps through the symmetric normalised Laplacian.
///
/// Solves `D⁻¹ L v = λ v` as `D^{-1/2} L D^{-1/2} z = λ z`, `v = D^{-1/2} z`,
/// and keeps eigenvectors 2..d+1.
pub fn lem_embed(graph: &NeighborGraph, d: usize) -> Result<Embedding> {
    let s = graph.len();
    check_dim(d, s)?;
    let deg: Vec<f64> = (0..s).map(|i| graph.weights.row(i).sum()).collect();
    if let Some(i) = deg.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::ZeroDegreeNode { node: i });
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|v| 1.0 / v.sqrt()).collect();
    let sym = DMatrix::from_fn(s, s, |i, j| {
        let l = if i == j { deg[i] - graph.weights[(i, j)] } else { -graph.weights[(i, j)] };
        inv_sqrt[i] * l * inv_sqrt[j]
    });
    let (vals, vecs) = sym_eigen_ascending(&sym);
    let mut y = DMatrix::zeros(d, s);
    for r in 0..d {
        let mut v = DVector::from_fn(s, |i, _| inv_sqrt[i] * vecs[(i, r + 1)]);
        fix_sign(&mut v);
        y.set_row(r, &v.transpose());
    }
    Ok(Embedding { y, d, method: EmbeddingMethod::Lem, eigenvalues: vals.rows(1, d).into_owned() })
}

/// Local reconstruction weights, one row per snapshot.
///
/// The local Gram matrix is regularised by `(Δ²/|N|) tr(G) I` when the
/// neighbourhood outnumbers the ambient dimension or the Gram matrix is
/// ill-conditioned (condition estimate above 1e12).
pub fn lle_weights(x: &DMatrix<f64>, graph: &NeighborGraph, delta: f64) -> Result<DMatrix<f64>> {
    let s = x.ncols();
    let m = x.nrows();
    let mut w = DMatrix::zeros(s, s);
    for i in 0..s {
        let nb = graph.neighbors(i);
        if nb.is_empty() {
            return Err(Error::ZeroDegreeNode { node: i });
        }
        let k = nb.len();
        let mut du = DMatrix::zeros(m, k);
        for (c, &j) in nb.iter().enumerate() {
            du.set_column(c, &(x.column(i) - x.column(j)));
        }
        let mut g = du.transpose() * &du;
        let ev = g.clone().symmetric_eigenvalues();
        let emax = ev.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
        let emin = ev.iter().cloned().fold(f64::INFINITY, |a, b| a.min(b.abs()));
        let ill = !(emin > 0.0) || emax / emin > 1e12;
        if k > m || ill {
            let tr = g.trace();
            let reg = if tr > 0.0 { delta * delta / k as f64 * tr } else { delta * delta };
            for c in 0..k {
                g[(c, c)] += reg;
            }
        }
        let ones = DVector::from_element(k, 1.0);
        let sol = g
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&ones))
            .or_else(|| g.clone().lu().solve(&ones))
            .ok_or(Error::SingularLocalSystem { node: i })?;
        let total: f64 = sol.sum();
        if !(total.abs() > 0.0) || sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularLocalSystem { node: i });
        }
        for (c, &j) in nb.iter().enumerate() {
            w[(i, j)] = sol[c] / total;
        }
    }
    Ok(w)
}

/// Eigenvectors 2..d+1 of `M = (I − W)ᵀ(I − W)`.
pub fn lle_embed(weights: &DMatrix<f64>, d: usize) -> Result<Embedding> {
    let s = weights.nrows();
    check_dim(d, s)?;
    let a = DMatrix::identity(s, s) - weights;
    let m = a.transpose() * a;
    let (vals, vecs) = sym_eigen_ascending(&m);
    let y = vecs.columns(1, d).transpose();
    Ok(Embedding { y, d, method: EmbeddingMethod::Lle, eigenvalues: vals.rows(1, d).into_owned() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::graph::{build_graph, GraphMethod};

    #[test]
    fn path_graph_orders_nodes() {
        let x = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 2.0]);
        let g = build_graph(&x, GraphMethod::SymmetricKnn { k: 1 }, None).unwrap();
        let e = lem_embed(&g, 1).unwrap();
        let y = e.y.row(0);
        assert!((y[0] < y[1] && y[1] < y[2]) || (y[0] > y[1] && y[1] > y[2]));
    }

    #[test]
    fn midpoint_weights() {
        let x = DMatrix::from_row_slice(1, 3, &[0.0, -1.0, 1.0]);
        let g = build_graph(&x, GraphMethod::SymmetricKnn { k: 2 }, None).unwrap();
        let w = lle_weights(&x, &g, 1e-3).unwrap();
        assert!((w[(0, 1)] - 0.5).abs() < 1e-12 && (w[(0, 2)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_neighbour_weight_is_one() {
        let x = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 3.0, 0.0, 0.0, 1.0]);
        let g = build_graph(&x, GraphMethod::SymmetricKnn { k: 1 }, None).unwrap();
        let w = lle_weights(&x, &g, 1e-3).unwrap();
        assert_eq!(w[(0, 1)], 1.0);
    }
}
