//! Full-order Newton–Raphson over load steps.

use std::time::Instant;

use nalgebra::{DVector, Matrix3};
use serde::{Deserialize, Serialize};

use super::assembly::Assembler;
use super::element::QuadratureRule;
use super::material::MaterialParams;
use super::sparse::SparseSolver;
use crate::error::{Error, Result};
use crate::linalg::max_abs;
use crate::mesh::{Mesh, PeriodicPairing};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Absolute tolerance on the residual max-norm, N.
    pub res_max: f64,
    pub max_iterations: usize,
    /// Equal substeps between consecutive path entries.
    pub n_load_steps: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { res_max: 1e-6, max_iterations: 30, n_load_steps: 1 }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.res_max > 0.0) || self.max_iterations == 0 || self.n_load_steps == 0 {
            return Err(Error::InvalidArgument(format!("invalid solver settings {self:?}")));
        }
        Ok(())
    }
}

/// Per load step bookkeeping shared by the full and reduced solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub iterations: usize,
    pub residual: f64,
    pub wall_ms: f64,
    /// Cluster selected at each iteration (LPOD only).
    pub clusters: Vec<usize>,
    /// At least four alternations between two clusters within the step.
    pub zigzag: bool,
}

/// Mesh, pairing and condensed assembler bundled for repeated solves.
#[derive(Debug, Clone)]
pub struct FemProblem {
    pub pairing: PeriodicPairing,
    pub assembler: Assembler,
}

impl FemProblem {
    pub fn new(mesh: &Mesh, mat: MaterialParams, rule: QuadratureRule) -> Result<Self> {
        let pairing = crate::mesh::build_periodic_pairing(mesh)?;
        let assembler = Assembler::periodic(mesh, &pairing, mat, rule)?;
        Ok(FemProblem { pairing, assembler })
    }

    pub fn mesh(&self) -> &Mesh {
        self.assembler.mesh()
    }

    /// Independent dimension `D`.
    pub fn dim(&self) -> usize {
        self.pairing.dim()
    }

    pub fn expand(&self, u: &DVector<f64>) -> Vec<f64> {
        self.pairing.expand(u.as_slice())
    }

    /// Condensed residual at an independent state.
    pub fn residual(&self, u: &DVector<f64>, h_bar: &Matrix3<f64>) -> Result<DVector<f64>> {
        self.assembler.residual(&self.expand(u), h_bar)
    }

    /// Solve along a path, warm-starting each step. Returns independent states.
    pub fn solve_path(&self, path: &[Matrix3<f64>], settings: &SolverSettings) -> Result<(Vec<DVector<f64>>, Vec<StepTrace>)> {
        settings.validate()?;
        if path.is_empty() {
            return Err(Error::InvalidArgument("empty load path".into()));
        }
        let mut lin = SparseSolver::new();
        let mut u = DVector::zeros(self.dim());
        let mut h_prev = Matrix3::zeros();
        let mut states = Vec::with_capacity(path.len());
        let mut traces = Vec::with_capacity(path.len());
        for (n, h_target) in path.iter().enumerate() {
            let step = n + 1;
            let t0 = Instant::now();
            let mut iterations = 0;
            let mut residual = 0.0;
            for sub in 1..=settings.n_load_steps {
                let h = h_prev + (h_target - h_prev) * (sub as f64 / settings.n_load_steps as f64);
                let (it, res) = self.newton(&mut u, &h, settings, &mut lin).map_err(|e| e.at_step(step))?;
                iterations += it;
                residual = res;
            }
            h_prev = *h_target;
            states.push(u.clone());
            traces.push(StepTrace {
                step,
                iterations,
                residual,
                wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                clusters: Vec::new(),
                zigzag: false,
            });
        }
        Ok((states, traces))
    }

    fn newton(&self, u: &mut DVector<f64>, h: &Matrix3<f64>, settings: &SolverSettings, lin: &mut SparseSolver) -> Result<(usize, f64)> {
        let mut res = f64::INFINITY;
        for it in 1..=settings.max_iterations {
            let sys = self.assembler.system(&self.expand(u), h)?;
            let rhs: Vec<f64> = sys.g_bc.iter().map(|v| -v).collect();
            let du = lin.solve(&sys.k_bc, &rhs)?;
            for (a, b) in u.iter_mut().zip(du) {
                *a += b;
            }
            res = max_abs(&self.residual(u, h)?);
            if !res.is_finite() {
                break;
            }
            if res < settings.res_max {
                return Ok((it, res));
            }
        }
        Err(Error::NoConvergence { step: 0, iterations: settings.max_iterations, residual: res })
    }
}

/// Converged full fluctuation fields (all `3 N` dofs) along `path`.
pub fn newton_solve(
    mesh: &Mesh,
    pairing: &PeriodicPairing,
    mat: &MaterialParams,
    path: &[Matrix3<f64>],
    settings: &SolverSettings,
) -> Result<Vec<DVector<f64>>> {
    let problem = FemProblem {
        pairing: pairing.clone(),
        assembler: Assembler::periodic(mesh, pairing, *mat, QuadratureRule::default())?,
    };
    let (states, _) = problem.solve_path(path, settings)?;
    Ok(states.iter().map(|u| DVector::from_vec(problem.expand(u))).collect())
}
