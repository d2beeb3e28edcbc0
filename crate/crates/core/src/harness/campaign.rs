//! Train/validate campaign over methods and reduced dimensions.

use std::time::Instant;

use log::{info, warn};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CampaignConfig, MethodConfig, MethodName};
use super::metrics::{relative_errors, summarise};
use super::paths::{generate_load_paths, LoadPath};
use crate::error::{Error, Result};
use crate::fem::{FemProblem, SolverSettings};
use crate::manifold::GraphMethod;
use crate::pod::{lpod_offline, numerical_rank, pod_eigenvalues, RngStream, SnapshotMeta, SnapshotSet, Truncation};
use crate::rom::{rom_solve, train_manl, train_pod, two_stage_offline, ManlParams, RomModel, SolveTrace};

/// Full-order reference solutions: `reference[p][n]` is step `n + 1` of path `p`.
pub fn solve_references(problem: &FemProblem, paths: &[LoadPath], settings: &SolverSettings) -> Result<Vec<Vec<DVector<f64>>>> {
    paths
        .par_iter()
        .map(|p| {
            problem.solve_path(&p.h_steps, settings).map(|r| r.0).map_err(|e| {
                warn!("full solve failed on path {}: {e}", p.id);
                e
            })
        })
        .collect()
}

/// Zero column followed by every step of every given path.
pub fn snapshots_from(paths: &[LoadPath], reference: &[Vec<DVector<f64>>], dim: usize) -> Result<SnapshotSet> {
    let mut cols = Vec::new();
    let mut meta = Vec::new();
    for (p, states) in paths.iter().zip(reference) {
        for (n, u) in states.iter().enumerate() {
            cols.push(u.clone());
            let h = &p.h_steps[n];
            meta.push(SnapshotMeta { path: Some(p.id), step: n + 1, h_bar: std::array::from_fn(|i| std::array::from_fn(|j| h[(i, j)])) });
        }
    }
    SnapshotSet::with_zero_column(dim, &cols, meta)
}

/// Full solves along `paths`, collected into a snapshot set with a leading zero column.
pub fn collect_snapshots(problem: &FemProblem, paths: &[LoadPath], settings: &SolverSettings) -> Result<SnapshotSet> {
    let reference = solve_references(problem, paths, settings)?;
    snapshots_from(paths, &reference, problem.dim())
}

/// Problem, paths and full-order data shared by all campaign cells.
pub struct Prepared {
    pub config: CampaignConfig,
    pub problem: FemProblem,
    pub paths: Vec<LoadPath>,
    pub reference: Vec<Vec<DVector<f64>>>,
    /// Training snapshots (first `n_train` paths).
    pub snapshots: SnapshotSet,
    pub full_solve_s: f64,
}

impl Prepared {
    pub fn new(config: &CampaignConfig) -> Result<Self> {
        config.validate()?;
        let mesh = config.mesh.build()?;
        let problem = FemProblem::new(&mesh, config.material.params()?, config.mesh.quadrature)?;
        let p = &config.paths;
        let paths = generate_load_paths(p.total(), &mut RngStream::new(p.seed), p.dh_lp, p.dh_ls, p.steps)?;
        info!("mesh: {} nodes, {} elements, D = {}", mesh.node_count(), mesh.element_count(), problem.dim());
        let t0 = Instant::now();
        let reference = solve_references(&problem, &paths, &config.solver.settings())?;
        let full_solve_s = t0.elapsed().as_secs_f64();
        info!("{} reference paths in {:.1} s", paths.len(), full_solve_s);
        let snapshots = snapshots_from(&paths[..p.n_train], &reference[..p.n_train], problem.dim())?;
        Ok(Prepared { config: config.clone(), problem, paths, reference, snapshots, full_solve_s })
    }

    pub fn n_train(&self) -> usize {
        self.config.paths.n_train
    }
}

fn widen(g: GraphMethod) -> GraphMethod {
    match g {
        GraphMethod::EpsBall { eps } => GraphMethod::EpsBall { eps: 2.0 * eps },
        GraphMethod::SymmetricKnn { k } => GraphMethod::SymmetricKnn { k: 2 * k },
        GraphMethod::MutualKnn { k } => GraphMethod::MutualKnn { k: 2 * k },
    }
}

fn saturated(g: GraphMethod, s: usize) -> bool {
    match g {
        GraphMethod::EpsBall { .. } => false,
        GraphMethod::SymmetricKnn { k } | GraphMethod::MutualKnn { k } => k >= s - 1,
    }
}

/// Retry a disconnected graph with doubled `k` (or `eps`) until connected or saturated.
fn with_graph_retry<T>(mut params: ManlParams, s: usize, mut f: impl FnMut(&ManlParams) -> Result<T>) -> Result<T> {
    for _ in 0..16 {
        match f(&params) {
            Err(Error::DisconnectedGraph { components }) if !saturated(params.graph, s) => {
                let wider = widen(params.graph);
                warn!("graph {:?} has {components} components, retrying with {:?}", params.graph, wider);
                params.graph = wider;
            }
            other => return other,
        }
    }
    f(&params)
}

/// Fit one method at reduced dimension `d`.
pub fn train_method(method: &MethodConfig, d: usize, snapshots: &SnapshotSet, rng: &mut RngStream) -> Result<RomModel> {
    let s = snapshots.len();
    match method.name {
        MethodName::Pod => Ok(RomModel::Pod(train_pod(snapshots, Truncation::Fixed(d))?)),
        MethodName::Lpod => Ok(RomModel::Lpod(lpod_offline(&snapshots.u, &method.lpod_params(), Truncation::Fixed(d), rng)?)),
        MethodName::Lem | MethodName::Lle => {
            let params = method.manl_params(d).expect("manifold method");
            if method.two_stage {
                let d_bar = match method.d_bar {
                    Some(v) => v,
                    None => (s - 1).min(60).min(numerical_rank(&pod_eigenvalues(&snapshots.u)?)),
                };
                with_graph_retry(params, s, |p| two_stage_offline(snapshots, d_bar, p)).map(RomModel::TwoStage)
            } else {
                with_graph_retry(params, s, |p| train_manl(&snapshots.u, 0, p)).map(RomModel::Manl)
            }
        }
    }
}

/// Replay result of one path.
#[derive(Debug)]
pub struct PathOutcome {
    pub path_id: usize,
    /// Reduced fluctuations per step; empty on failure.
    pub states: Vec<DVector<f64>>,
    /// Relative error per step; empty on failure.
    pub errors: Vec<f64>,
    pub trace: SolveTrace,
    pub failure: Option<Error>,
}

impl PathOutcome {
    pub fn converged(&self) -> bool {
        self.failure.is_none()
    }
}

/// Run the ROM along every path and compare with the reference solutions.
pub fn replay(model: &RomModel, problem: &FemProblem, paths: &[LoadPath], reference: &[Vec<DVector<f64>>], settings: &SolverSettings) -> Vec<PathOutcome> {
    paths
        .par_iter()
        .zip(reference.par_iter())
        .map(|(p, refs)| match rom_solve(model, problem, &p.h_steps, settings) {
            Ok((states, trace)) => {
                let u: Vec<DVector<f64>> = states.into_iter().map(|s| s.u).collect();
                match relative_errors(&u, refs) {
                    Ok(errors) => PathOutcome { path_id: p.id, states: u, errors, trace, failure: None },
                    Err(e) => PathOutcome { path_id: p.id, states: Vec::new(), errors: Vec::new(), trace, failure: Some(e) },
                }
            }
            Err(e) => PathOutcome { path_id: p.id, states: Vec::new(), errors: Vec::new(), trace: SolveTrace::default(), failure: Some(e) },
        })
        .collect()
}

/// One (method, d) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub d: usize,
    /// Mean relative error over converged paths, fraction.
    pub e_mean: f64,
    pub e_max: f64,
    /// Mean relative error over the converged training paths.
    pub e_mean_train: f64,
    /// Replay wall time over all paths, s.
    pub wall_s: f64,
    pub train_s: f64,
    pub converged_paths: usize,
    pub path_converged: Vec<bool>,
    pub mean_iterations: f64,
    pub zigzag_steps: usize,
    /// Mean local linearisation time per call, s.
    pub linearise_s: f64,
    /// Training or setup failure of the whole cell.
    pub failure: Option<String>,
}

impl ReportRow {
    fn failed(method: String, d: usize, n_paths: usize, err: &Error) -> Self {
        ReportRow {
            method,
            d,
            e_mean: f64::NAN,
            e_max: f64::NAN,
            e_mean_train: f64::NAN,
            wall_s: 0.0,
            train_s: 0.0,
            converged_paths: 0,
            path_converged: vec![false; n_paths],
            mean_iterations: f64::NAN,
            zigzag_steps: 0,
            linearise_s: 0.0,
            failure: Some(format!("{}: {err}", err.code())),
        }
    }

    /// Aggregate path outcomes; the first `n_train` outcomes are training paths.
    pub fn from_outcomes(method: String, d: usize, outcomes: &[PathOutcome], n_train: usize, wall_s: f64, train_s: f64) -> Self {
        let all: Vec<f64> = outcomes.iter().flat_map(|o| o.errors.iter().cloned()).collect();
        let train: Vec<f64> = outcomes.iter().take(n_train).flat_map(|o| o.errors.iter().cloned()).collect();
        let (e_mean, e_max) = if all.is_empty() { (f64::NAN, f64::NAN) } else { summarise(&all) };
        let e_mean_train = if train.is_empty() { f64::NAN } else { summarise(&train).0 };
        let steps: Vec<_> = outcomes.iter().flat_map(|o| o.trace.steps.iter()).collect();
        let calls: usize = outcomes.iter().map(|o| o.trace.linearise_calls).sum();
        let lin_s: f64 = outcomes.iter().map(|o| o.trace.linearise_s).sum();
        for o in outcomes.iter().filter(|o| !o.converged()) {
            warn!("{method} d={d}: path {} failed: {}", o.path_id, o.failure.as_ref().expect("failed"));
        }
        ReportRow {
            method,
            d,
            e_mean,
            e_max,
            e_mean_train,
            wall_s,
            train_s,
            converged_paths: outcomes.iter().filter(|o| o.converged()).count(),
            path_converged: outcomes.iter().map(|o| o.converged()).collect(),
            mean_iterations: steps.iter().map(|s| s.iterations as f64).sum::<f64>() / steps.len().max(1) as f64,
            zigzag_steps: steps.iter().filter(|s| s.zigzag).count(),
            linearise_s: if calls == 0 { 0.0 } else { lin_s / calls as f64 },
            failure: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    /// Independent dofs.
    pub dim: usize,
    pub snapshot_count: usize,
    pub path_count: usize,
    pub full_solve_s: f64,
}

pub const REPORT_CSV_HEADER: &str = "method,d,E_mean_pct,E_max_pct,wall_s,converged_paths\n";

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_CSV_HEADER);
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{:.3},{}\n", r.method, r.d, 100.0 * r.e_mean, 100.0 * r.e_max, r.wall_s, r.converged_paths));
        }
        out
    }

    pub fn row(&self, method: &str, d: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method && r.d == d)
    }
}

/// Train and replay one cell. `index` keys its random stream.
pub fn run_cell(prep: &Prepared, method: &MethodConfig, d: usize, index: u64) -> ReportRow {
    let label = method.label();
    let settings = prep.config.solver.settings();
    let mut rng = RngStream::derived(prep.config.paths.seed, index);
    let t0 = Instant::now();
    let model = match train_method(method, d, &prep.snapshots, &mut rng) {
        Ok(m) => m,
        Err(e) => {
            warn!("{label} d={d}: training failed: {e}");
            return ReportRow::failed(label, d, prep.paths.len(), &e);
        }
    };
    let train_s = t0.elapsed().as_secs_f64();
    // untimed warm-up step
    let _ = rom_solve(&model, &prep.problem, &prep.paths[0].h_steps[..1], &settings);
    let t1 = Instant::now();
    let outcomes = replay(&model, &prep.problem, &prep.paths, &prep.reference, &settings);
    let wall_s = t1.elapsed().as_secs_f64();
    let row = ReportRow::from_outcomes(label, d, &outcomes, prep.n_train(), wall_s, train_s);
    info!(
        "{} d={}: E_mean {:.4}%, E_max {:.4}%, {}/{} paths, {:.1} s",
        row.method,
        row.d,
        100.0 * row.e_mean,
        100.0 * row.e_max,
        row.converged_paths,
        prep.paths.len(),
        row.wall_s
    );
    row
}

/// Every configured (method, d) cell on prepared data, in config order.
pub fn run_cells(prep: &Prepared) -> ExperimentReport {
    let cells: Vec<(u64, &MethodConfig, usize)> = prep
        .config
        .methods
        .iter()
        .enumerate()
        .flat_map(|(i, m)| m.d.values().into_iter().map(move |d| (((i as u64) << 32) | d as u64, m, d)))
        .collect();
    let rows = cells.par_iter().map(|&(idx, m, d)| run_cell(prep, m, d, idx)).collect();
    ExperimentReport {
        rows,
        dim: prep.problem.dim(),
        snapshot_count: prep.snapshots.len(),
        path_count: prep.paths.len(),
        full_solve_s: prep.full_solve_s,
    }
}

pub fn run_campaign(config: &CampaignConfig) -> Result<ExperimentReport> {
    Ok(run_cells(&Prepared::new(config)?))
}
