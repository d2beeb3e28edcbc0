use nalgebra::Matrix3;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pod::RngStream;

/// Random macroscopic load path starting from `H̄ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadPath {
    pub id: usize,
    /// `H̄` after each step (the initial zero state is not stored).
    pub h_steps: Vec<Matrix3<f64>>,
    /// Fixed principal direction.
    pub n_lp: Matrix3<f64>,
    /// Per-step perturbation directions.
    pub n_ls: Vec<Matrix3<f64>>,
    pub dh_lp: f64,
    pub dh_ls: f64,
}

impl LoadPath {
    pub fn steps(&self) -> usize {
        self.h_steps.len()
    }
}

/// Nine i.i.d. standard normals as a 3×3 matrix with unit Frobenius norm.
pub fn random_direction(rng: &mut RngStream) -> Matrix3<f64> {
    loop {
        let m = Matrix3::from_fn(|_, _| StandardNormal.sample(rng.rng()));
        let n: f64 = m.norm();
        if n > 0.0 {
            return m / n;
        }
    }
}

/// `H̄ ← H̄ + ΔH_LP N_LP + ΔH_LS N_LS(n)` for `steps` steps per path.
pub fn generate_load_paths(count: usize, rng: &mut RngStream, dh_lp: f64, dh_ls: f64, steps: usize) -> Result<Vec<LoadPath>> {
    if count == 0 || steps == 0 {
        return Err(Error::InvalidArgument(format!("need count >= 1 and steps >= 1, got {count}, {steps}")));
    }
    Ok((0..count)
        .map(|id| {
            let n_lp = random_direction(rng);
            let mut h = Matrix3::zeros();
            let mut h_steps = Vec::with_capacity(steps);
            let mut n_ls = Vec::with_capacity(steps);
            for _ in 0..steps {
                let nl = random_direction(rng);
                h += n_lp * dh_lp + nl * dh_ls;
                h_steps.push(h);
                n_ls.push(nl);
            }
            LoadPath { id, h_steps, n_lp, n_ls, dh_lp, dh_ls }
        })
        .collect())
}
