use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pod::{numerical_rank, pod_eigenvalues};

/// `‖ū − u‖ / ‖u‖` per sample.
pub fn relative_errors(rom: &[DVector<f64>], reference: &[DVector<f64>]) -> Result<Vec<f64>> {
    if rom.len() != reference.len() {
        return Err(Error::InvalidArgument(format!("{} ROM states vs {} reference states", rom.len(), reference.len())));
    }
    rom.iter()
        .zip(reference)
        .enumerate()
        .map(|(i, (a, b))| {
            let nb = b.norm();
            if nb < 1e-14 {
                return Err(Error::ZeroReference { index: i });
            }
            Ok((a - b).norm() / nb)
        })
        .collect()
}

/// Mean and maximum relative error as fractions.
pub fn error_metrics(rom: &[DVector<f64>], reference: &[DVector<f64>]) -> Result<(f64, f64)> {
    let e = relative_errors(rom, reference)?;
    Ok(summarise(&e))
}

/// Mean and max of a list of errors; `(0, 0)` when empty.
pub fn summarise(errors: &[f64]) -> (f64, f64) {
    if errors.is_empty() {
        return (0.0, 0.0);
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let max = errors.iter().cloned().fold(0.0f64, f64::max);
    (mean, max)
}

/// Covariance spectrum with cumulative energy fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecay {
    pub eigenvalues: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub rank: usize,
}

impl EigenDecay {
    /// Smallest mode count whose cumulative fraction reaches `level`.
    pub fn modes_for(&self, level: f64) -> usize {
        self.cumulative.iter().position(|&c| c >= level).map_or(self.cumulative.len(), |p| p + 1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,eigenvalue,cumulative\n");
        for (i, (l, c)) in self.eigenvalues.iter().zip(&self.cumulative).enumerate() {
            out.push_str(&format!("{},{:e},{}\n", i + 1, l, c));
        }
        out
    }
}

pub fn eigenvalue_decay_report(u: &DMatrix<f64>) -> Result<EigenDecay> {
    let vals = pod_eigenvalues(u)?;
    let total: f64 = vals.iter().sum();
    let mut acc = 0.0;
    let cumulative = vals
        .iter()
        .map(|v| {
            acc += v;
            if total > 0.0 {
                acc / total
            } else {
                0.0
            }
        })
        .collect();
    Ok(EigenDecay { rank: numerical_rank(&vals), eigenvalues: vals.iter().cloned().collect(), cumulative })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scaled_field() {
        let u = vec![DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![-3.0, 0.5])];
        let r: Vec<_> = u.iter().map(|v| v * 1.01).collect();
        let (m, x) = error_metrics(&r, &u).unwrap();
        assert_relative_eq!(m, 0.01, epsilon = 1e-12);
        assert_relative_eq!(x, 0.01, epsilon = 1e-12);
    }

    #[test]
    fn outlier() {
        let mut e = vec![0.01; 9];
        e.push(0.05);
        let (m, x) = summarise(&e);
        assert_relative_eq!(m, 0.014, epsilon = 1e-12);
        assert_relative_eq!(x, 0.05);
    }

    #[test]
    fn zero_reference_rejected() {
        let z = vec![DVector::zeros(2)];
        assert!(matches!(error_metrics(&z, &z), Err(Error::ZeroReference { index: 0 })));
    }

    #[test]
    fn rank_one_decay() {
        let u = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 2.0, 0.0, 1.0, 2.0]);
        let r = eigenvalue_decay_report(&u).unwrap();
        assert_eq!(r.rank, 1);
        assert_relative_eq!(r.cumulative[0], 1.0, epsilon = 1e-12);
    }
}
