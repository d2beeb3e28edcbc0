use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale-dependent correlation dimension of a point cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrDimEstimate {
    /// `0, Δε, 2Δε, ..., ε_max`.
    pub eps_grid: Vec<f64>,
    /// Fraction of point pairs with distance `<= ε`.
    pub p_cd: Vec<f64>,
    /// Slope between grid point `i` and `i + 1`; `None` where a log is undefined.
    pub delta_sd: Vec<Option<f64>>,
}

impl CorrDimEstimate {
    /// Median of the defined slopes over the lowest `fraction` of the scale range.
    pub fn plateau(&self, fraction: f64) -> Option<f64> {
        let eps_max = *self.eps_grid.last()?;
        let mut v: Vec<f64> = self
            .eps_grid
            .iter()
            .zip(&self.delta_sd)
            .filter(|(e, _)| **e <= fraction * eps_max)
            .filter_map(|(_, d)| *d)
            .collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(v[v.len() / 2])
    }

    /// CSV with header `eps,p_cd,delta_sd,plateau`; undefined slopes are empty.
    pub fn to_csv(&self) -> String {
        let plateau = self.plateau(0.2).map(|p| p.to_string()).unwrap_or_default();
        let mut out = String::from("eps,p_cd,delta_sd,plateau\n");
        for i in 0..self.eps_grid.len() {
            let slope = self.delta_sd.get(i).copied().flatten().map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", self.eps_grid[i], self.p_cd[i], slope, plateau));
        }
        out
    }
}

/// Pair-count estimate over `grid_points` equal scale increments between 0
/// and the largest pair distance of the columns of `u`.
pub fn correlation_dimension(u: &DMatrix<f64>, grid_points: usize) -> Result<CorrDimEstimate> {
    let s = u.ncols();
    if s < 2 || grid_points == 0 {
        return Err(Error::InvalidArgument(format!("need >= 2 points and >= 1 grid step, got s={s}, grid={grid_points}")));
    }
    let norms: Vec<f64> = (0..s).map(|i| u.column(i).norm_squared()).collect();
    let gram = u.transpose() * u;
    let mut dist: Vec<f64> = (0..s)
        .into_par_iter()
        .flat_map_iter(|i| {
            let gram = &gram;
            let norms = &norms;
            ((i + 1)..s).map(move |j| (norms[i] + norms[j] - 2.0 * gram[(i, j)]).max(0.0).sqrt())
        })
        .collect();
    dist.par_sort_unstable_by(f64::total_cmp);
    let pairs = dist.len() as f64;
    let eps_max = *dist.last().expect("at least one pair");
    let step = eps_max / grid_points as f64;
    let eps_grid: Vec<f64> = (0..=grid_points).map(|i| if i == grid_points { eps_max } else { i as f64 * step }).collect();
    let p_cd: Vec<f64> = eps_grid
        .iter()
        .map(|&e| dist.partition_point(|&d| d <= e) as f64 / pairs)
        .collect();
    let delta_sd = (0..grid_points)
        .map(|i| {
            let (e0, e1, p0, p1) = (eps_grid[i], eps_grid[i + 1], p_cd[i], p_cd[i + 1]);
            if e0 > 0.0 && p0 > 0.0 && p1 > 0.0 && e1 > e0 {
                Some((p1.ln() - p0.ln()) / (e1.ln() - e0.ln()))
            } else {
                None
            }
        })
        .collect();
    Ok(CorrDimEstimate { eps_grid, p_cd, delta_sd })
}
