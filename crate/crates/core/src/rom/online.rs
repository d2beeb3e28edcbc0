use std::time::Instant;

use log::debug;
use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use super::model::{ManlModel, PodModel, RomModel, TwoStageModel};
use crate::error::{Error, Result};
use crate::fem::{FemProblem, SolverSettings, StepTrace};
use crate::linalg::{col_dist2, max_abs, solve_dense, solve_upper};
use crate::manifold::local_linearise;
use crate::pod::LpodModel;

/// Reduced coordinates and the reconstructed independent fluctuation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    /// Empty for LPOD, which has no global reduced coordinates.
    pub y: DVector<f64>,
    /// Independent-dof fluctuation `ū`.
    pub u: DVector<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub steps: Vec<StepTrace>,
    /// Number of local linearisations (including QR) performed.
    pub linearise_calls: usize,
    /// Total time spent in them, seconds.
    pub linearise_s: f64,
}

impl SolveTrace {
    /// Mean linearise + QR time per call, seconds.
    pub fn linearise_per_call(&self) -> f64 {
        if self.linearise_calls == 0 {
            0.0
        } else {
            self.linearise_s / self.linearise_calls as f64
        }
    }

    /// CSV rows `path_id,step,iterations,residual,wall_ms,cluster_seq`.
    pub fn csv_rows(&self, path_id: usize) -> String {
        let mut out = String::new();
        for s in &self.steps {
            let seq: Vec<String> = s.clusters.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!("{},{},{},{:e},{:.3},{}\n", path_id, s.step, s.iterations, s.residual, s.wall_ms, seq.join(";")));
        }
        out
    }
}

pub const TRACE_CSV_HEADER: &str = "path_id,step,iterations,residual,wall_ms,cluster_seq\n";

/// How a reduced increment `Δz` maps to `Δy`.
enum Increment {
    /// `Δy = Δz`.
    Direct,
    /// `Δy = R⁻¹ Δz`.
    Triangular(DMatrix<f64>),
    /// No reduced coordinates are tracked.
    Untracked,
}

struct Projector {
    /// D×r Galerkin basis; `Δū = basis Δz`.
    basis: DMatrix<f64>,
    /// Orthonormal basis of the same span for the convergence test, when
    /// `basis` itself is not orthonormal.
    check: Option<DMatrix<f64>>,
    increment: Increment,
    cluster: Option<usize>,
}

impl Projector {
    /// `‖Qᵀg‖∞` with `Q` orthonormal, so the stopping test does not depend on
    /// how the tangent space is parametrised.
    fn reduced_residual(&self, g: &DVector<f64>) -> f64 {
        max_abs(&(self.check.as_ref().unwrap_or(&self.basis).transpose() * g))
    }
}

trait Scheme {
    fn initial_y(&self) -> DVector<f64>;
    fn projector(&mut self, y: &DVector<f64>, u: &DVector<f64>, trace: &mut SolveTrace) -> Result<Projector>;
}

struct FixedBasis<'a> {
    psi: &'a DMatrix<f64>,
}

impl Scheme for FixedBasis<'_> {
    fn initial_y(&self) -> DVector<f64> {
        DVector::zeros(self.psi.ncols())
    }

    fn projector(&mut self, _: &DVector<f64>, _: &DVector<f64>, _: &mut SolveTrace) -> Result<Projector> {
        Ok(Projector { basis: self.psi.clone(), check: None, increment: Increment::Direct, cluster: None })
    }
}

struct LocalBases<'a> {
    model: &'a LpodModel,
}

impl Scheme for LocalBases<'_> {
    fn initial_y(&self) -> DVector<f64> {
        DVector::zeros(0)
    }

    fn projector(&mut self, _: &DVector<f64>, u: &DVector<f64>, _: &mut SolveTrace) -> Result<Projector> {
        let ucol = DMatrix::from_column_slice(u.len(), 1, u.as_slice());
        let mut best = (0, f64::INFINITY);
        for j in 0..self.model.centroids.ncols() {
            let d = col_dist2(&ucol, 0, &self.model.centroids, j);
            if d < best.1 {
                best = (j, d);
            }
        }
        Ok(Projector { basis: self.model.bases[best.0].psi.clone(), check: None, increment: Increment::Untracked, cluster: Some(best.0) })
    }
}

struct Manifold<'a> {
    model: &'a ManlModel,
    /// Stage-one basis when running doubly reduced.
    lift: Option<&'a DMatrix<f64>>,
}

impl Manifold<'_> {
    fn lifted(&self, b: DMatrix<f64>) -> DMatrix<f64> {
        match self.lift {
            Some(psi) => psi * b,
            None => b,
        }
    }
}

impl Scheme for Manifold<'_> {
    fn initial_y(&self) -> DVector<f64> {
        match &self.model.global {
            Some(_) => DVector::zeros(self.model.embedding.d),
            None => self.model.y().column(self.model.zero_col).into_owned(),
        }
    }

    fn projector(&mut self, y: &DVector<f64>, _: &DVector<f64>, trace: &mut SolveTrace) -> Result<Projector> {
        let p = &self.model.params;
        if let Some(g) = &self.model.global {
            return Ok(if p.orthonormalise {
                // ψ = ψ⊥ R with R = ψ⊥ᵀ ψ upper triangular
                let r = g.psi_perp.transpose() * &g.psi;
                Projector { basis: self.lifted(g.psi_perp.clone()), check: None, increment: Increment::Triangular(r), cluster: None }
            } else {
                let check = Some(self.lifted(g.psi_perp.clone()));
                Projector { basis: self.lifted(g.psi.clone()), check, increment: Increment::Direct, cluster: None }
            });
        }
        let t0 = Instant::now();
        let s = self.model.snapshot_count();
        let d = self.model.embedding.d;
        let tangent = match local_linearise(y, self.model.y(), &self.model.u_ambient, p.n_lin) {
            // a structurally valid neighbourhood that happens to be degenerate gets one wider retry
            Err(Error::SingularNeighborhood { .. }) if p.n_lin > d && p.n_lin < s => {
                local_linearise(y, self.model.y(), &self.model.u_ambient, (2 * p.n_lin).min(s))
            }
            other => other,
        }?;
        trace.linearise_calls += 1;
        trace.linearise_s += t0.elapsed().as_secs_f64();
        Ok(if p.orthonormalise {
            Projector { basis: self.lifted(tangent.phi_perp), check: None, increment: Increment::Triangular(tangent.r_perp), cluster: None }
        } else {
            let check = Some(self.lifted(tangent.phi_perp));
            Projector { basis: self.lifted(tangent.phi), check, increment: Increment::Direct, cluster: None }
        })
    }
}

fn zigzag(clusters: &[usize]) -> bool {
    let mut counts = std::collections::HashMap::new();
    for w in clusters.windows(2) {
        if w[0] != w[1] {
            *counts.entry((w[0].min(w[1]), w[0].max(w[1]))).or_insert(0usize) += 1;
        }
    }
    counts.values().any(|&c| c >= 4)
}

/// Reduced Newton iteration shared by all ROMs.
fn reduced_newton<S: Scheme>(
    problem: &FemProblem,
    scheme: &mut S,
    path: &[Matrix3<f64>],
    settings: &SolverSettings,
) -> Result<(Vec<ReducedState>, SolveTrace)> {
    settings.validate()?;
    let mut trace = SolveTrace::default();
    let mut y = scheme.initial_y();
    let mut u = DVector::zeros(problem.dim());
    let mut states = Vec::with_capacity(path.len());
    for (n, h) in path.iter().enumerate() {
        let step = n + 1;
        let t0 = Instant::now();
        let mut proj = scheme.projector(&y, &u, &mut trace).map_err(|e| e.at_step(step))?;
        let mut clusters = Vec::new();
        let mut done = None;
        let mut res = f64::INFINITY;
        for it in 1..=settings.max_iterations {
            if let Some(c) = proj.cluster {
                clusters.push(c);
            }
            let sys = problem.assembler.system(&problem.expand(&u), h).map_err(|e| e.at_step(step))?;
            let kb = sys.k_bc.mul_dense(&proj.basis);
            let kr = proj.basis.transpose() * kb;
            let gr = proj.basis.transpose() * &sys.g_bc;
            let dz = solve_dense(&kr, &(-gr))?;
            u += &proj.basis * &dz;
            match &proj.increment {
                Increment::Direct => y += &dz,
                Increment::Triangular(r) => y += solve_upper(r, &dz)?,
                Increment::Untracked => {}
            }
            let g = problem.residual(&u, h).map_err(|e| e.at_step(step))?;
            proj = scheme.projector(&y, &u, &mut trace).map_err(|e| e.at_step(step))?;
            res = proj.reduced_residual(&g);
            debug!("step {step} iteration {it}: reduced residual {res:.3e}");
            if !res.is_finite() {
                break;
            }
            if res < settings.res_max {
                done = Some(it);
                break;
            }
        }
        let iterations = done.ok_or(Error::NoConvergence { step, iterations: settings.max_iterations, residual: res })?;
        trace.steps.push(StepTrace {
            step,
            iterations,
            residual: res,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
            zigzag: zigzag(&clusters),
            clusters,
        });
        states.push(ReducedState { y: y.clone(), u: u.clone() });
    }
    Ok((states, trace))
}

pub fn rom_solve_pod(model: &PodModel, problem: &FemProblem, path: &[Matrix3<f64>], settings: &SolverSettings) -> Result<(Vec<ReducedState>, SolveTrace)> {
    reduced_newton(problem, &mut FixedBasis { psi: &model.basis.psi }, path, settings)
}

pub fn rom_solve_lpod(model: &LpodModel, problem: &FemProblem, path: &[Matrix3<f64>], settings: &SolverSettings) -> Result<(Vec<ReducedState>, SolveTrace)> {
    reduced_newton(problem, &mut LocalBases { model }, path, settings)
}

pub fn rom_solve_manl(model: &ManlModel, problem: &FemProblem, path: &[Matrix3<f64>], settings: &SolverSettings) -> Result<(Vec<ReducedState>, SolveTrace)> {
    reduced_newton(problem, &mut Manifold { model, lift: None }, path, settings)
}

pub fn rom_solve_two_stage(
    model: &TwoStageModel,
    problem: &FemProblem,
    path: &[Matrix3<f64>],
    settings: &SolverSettings,
) -> Result<(Vec<ReducedState>, SolveTrace)> {
    reduced_newton(problem, &mut Manifold { model: &model.inner, lift: Some(&model.psi_stage1) }, path, settings)
}

/// Dispatch on the model kind.
pub fn rom_solve(model: &RomModel, problem: &FemProblem, path: &[Matrix3<f64>], settings: &SolverSettings) -> Result<(Vec<ReducedState>, SolveTrace)> {
    match model {
        RomModel::Pod(m) => rom_solve_pod(m, problem, path, settings),
        RomModel::Lpod(m) => rom_solve_lpod(m, problem, path, settings),
        RomModel::Manl(m) => rom_solve_manl(m, problem, path, settings),
        RomModel::TwoStage(m) => rom_solve_two_stage(m, problem, path, settings),
    }
}

#[cfg(test)]
mod tests {
    use super::zigzag;

    #[test]
    fn zigzag_needs_four_switches() {
        assert!(!zigzag(&[0, 1, 0, 1]));
        assert!(zigzag(&[0, 1, 0, 1, 0]));
        assert!(!zigzag(&[0, 1, 2, 0, 1]));
    }
}
