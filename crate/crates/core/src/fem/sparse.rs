//! Compressed sparse row storage and a cached direct solver.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::reborrow::Reborrow;
use faer::{MatMut, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Square CSR matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Empty pattern from per-row column sets.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix { n, row_ptr, col_idx, values: vec![0.0; nnz] }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Storage position of `(i, j)` if it is in the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi].binary_search(&j).ok().map(|p| lo + p)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|p| self.values[p] * x[self.col_idx[p]])
                    .sum()
            })
            .collect()
    }

    /// `A B` for a dense `B` with `n` rows.
    pub fn mul_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let m = b.ncols();
        // row-major copy so each nonzero touches one contiguous slice
        let mut br = vec![0.0; self.n * m];
        for c in 0..m {
            for (i, v) in b.column(c).iter().enumerate() {
                br[i * m + c] = *v;
            }
        }
        let mut out = vec![0.0; self.n * m];
        for i in 0..self.n {
            let row = &mut out[i * m..(i + 1) * m];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let v = self.values[p];
                let src = &br[self.col_idx[p] * m..(self.col_idx[p] + 1) * m];
                for (o, s) in row.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
        DMatrix::from_row_slice(self.n, m, &out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[(i, self.col_idx[p])] += self.values[p];
            }
        }
        d
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                worst = worst.max((self.values[p] - self.get(j, i)).abs());
            }
        }
        worst / scale
    }
}

/// Direct solver for symmetric matrices sharing one sparsity pattern.
///
/// The symbolic factorisation is computed on first use and reused while the
/// pattern stays the same. Falls back to LU if Cholesky fails.
#[derive(Default)]
pub struct SparseSolver {
    pattern: Option<(Vec<usize>, Vec<usize>)>,
    symbolic: Option<SymbolicSparseColMat<usize>>,
    llt: Option<SymbolicLlt<usize>>,
    lu: Option<SymbolicLu<usize>>,
}

impl SparseSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solve `a x = b` where `a` is symmetric.
    pub fn solve(&mut self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let same = matches!(&self.pattern, Some((rp, ci)) if *rp == a.row_ptr && *ci == a.col_idx);
        if !same {
            // CSR of a symmetric matrix read as CSC is the same matrix
            let sym = SymbolicSparseColMat::new_checked(a.n, a.n, a.row_ptr.clone(), None, a.col_idx.clone());
            self.llt = Some(
                SymbolicLlt::try_new(sym.rb(), Side::Lower).map_err(|e| Error::LinearSolve(format!("{e:?}")))?,
            );
            self.lu = None;
            self.symbolic = Some(sym);
            self.pattern = Some((a.row_ptr.clone(), a.col_idx.clone()));
        }
        let sym = self.symbolic.as_ref().expect("symbolic pattern");
        let mat = SparseColMatRef::new(sym.rb(), &a.values);
        let mut x = b.to_vec();
        let rhs = MatMut::from_column_major_slice_mut(&mut x, a.n, 1);
        match Llt::try_new_with_symbolic(self.llt.clone().expect("symbolic llt"), mat, Side::Lower) {
            Ok(f) => f.solve_in_place(rhs),
            Err(_) => {
                if self.lu.is_none() {
                    self.lu = Some(SymbolicLu::try_new(sym.rb()).map_err(|e| Error::LinearSolve(format!("{e:?}")))?);
                }
                let f = Lu::try_new_with_symbolic(self.lu.clone().expect("symbolic lu"), mat)
                    .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
                f.solve_in_place(rhs);
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("non-finite solution".into()));
        }
        Ok(x)
    }
}

/// Convenience wrapper for one-off solves.
pub fn solve_sparse(a: &CsrMatrix, b: &DVector<f64>) -> Result<DVector<f64>> {
    let x = SparseSolver::new().solve(a, b.as_slice())?;
    Ok(DVector::from_vec(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![i];
                if i > 0 {
                    r.push(i - 1);
                }
                if i + 1 < n {
                    r.push(i + 1);
                }
                r
            })
            .collect();
        let mut a = CsrMatrix::from_pattern(rows);
        for i in 0..n {
            for p in a.row_ptr[i]..a.row_ptr[i + 1] {
                a.values[p] = if a.col_idx[p] == i { 2.0 } else { -1.0 };
            }
        }
        a
    }

    #[test]
    fn solves_spd_system() {
        let a = laplacian_1d(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let mut s = SparseSolver::new();
        let x = s.solve(&a, &b).unwrap();
        let ax = a.mul_vec(&x);
        for i in 0..50 {
            assert!((ax[i] - b[i]).abs() < 1e-10);
        }
        // reuse of the symbolic factor
        let x2 = s.solve(&a, &b).unwrap();
        assert_eq!(x, x2);
    }

    #[test]
    fn indefinite_falls_back_to_lu() {
        let mut a = laplacian_1d(10);
        for v in a.values.iter_mut() {
            *v = -*v;
        }
        let p = a.position(0, 0).unwrap();
        a.values[p] = 5.0;
        let b = vec![1.0; 10];
        let x = SparseSolver::new().solve(&a, &b).unwrap();
        let ax = a.mul_vec(&x);
        for i in 0..10 {
            assert!((ax[i] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dense_product_matches() {
        let a = laplacian_1d(6);
        let b = DMatrix::from_fn(6, 2, |i, j| (i * 3 + j) as f64);
        assert_eq!(a.mul_dense(&b), a.to_dense() * &b);
    }
}
