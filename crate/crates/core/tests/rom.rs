use std::sync::OnceLock;

use manrom::fem::{FemProblem, MaterialParams, QuadratureRule, SolverSettings};
use manrom::harness::{generate_load_paths, relative_errors, snapshots_from, solve_references, LoadPath};
use manrom::linalg::pairwise_dist2;
use manrom::manifold::{EmbeddingMethod, GraphMethod};
use manrom::mesh::{carve_pores, generate_cube_mesh, PoreSpec};
use manrom::pod::{lpod_offline, numerical_rank, pod_eigenvalues, ClusterBounds, LpodParams, PodBasis, RngStream, SnapshotSet, Truncation};
use manrom::rom::{
    rom_solve, rom_solve_lpod, rom_solve_manl, rom_solve_pod, rom_solve_two_stage, train_manl, train_pod, two_stage_offline,
    Linearisation, ManlParams, PodModel, RomModel,
};
use manrom::Error;
use nalgebra::{DVector, Matrix3};

struct Fixture {
    problem: FemProblem,
    paths: Vec<LoadPath>,
    reference: Vec<Vec<DVector<f64>>>,
    snapshots: SnapshotSet,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let pores = PoreSpec { centers: vec![[2.0, 2.0, 2.0], [4.0, 4.0, 4.0]], radius: 1.5 };
        let mesh = carve_pores(&generate_cube_mesh(6.0, 4).unwrap(), &pores).unwrap();
        let mat = MaterialParams::from_youngs(1000.0, 0.2).unwrap();
        let problem = FemProblem::new(&mesh, mat, QuadratureRule::FourPoint).unwrap();
        let paths = generate_load_paths(4, &mut RngStream::new(5), 0.03, 0.015, 4).unwrap();
        let reference = solve_references(&problem, &paths, &SolverSettings::default()).unwrap();
        let snapshots = snapshots_from(&paths[..3], &reference[..3], problem.dim()).unwrap();
        Fixture { problem, paths, reference, snapshots }
    })
}

fn settings() -> SolverSettings {
    SolverSettings::default()
}

fn manl_params(method: EmbeddingMethod, d: usize) -> ManlParams {
    ManlParams { graph: GraphMethod::SymmetricKnn { k: 5 }, n_lin: 8, ..ManlParams::defaults(method, d) }
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn zero_load_is_trivial_for_every_rom() {
    let f = fixture();
    let zero = [Matrix3::zeros(); 2];
    let pod = RomModel::Pod(train_pod(&f.snapshots, Truncation::Fixed(3)).unwrap());
    let params = LpodParams { k: 2, r: 1.0, bounds: ClusterBounds { core_min: 1, min: 5, max: 13 }, max_restarts: 20 };
    let lpod = RomModel::Lpod(lpod_offline(&f.snapshots.u, &params, Truncation::Fixed(2), &mut RngStream::new(1)).unwrap());
    let manl = RomModel::Manl(train_manl(&f.snapshots.u, 0, &manl_params(EmbeddingMethod::Lem, 3)).unwrap());
    let two = RomModel::TwoStage(two_stage_offline(&f.snapshots, 6, &manl_params(EmbeddingMethod::Lle, 3)).unwrap());
    for model in [pod, lpod, manl, two] {
        let (states, trace) = rom_solve(&model, &f.problem, &zero, &settings()).unwrap();
        assert_eq!(states.len(), 2);
        for (s, t) in states.iter().zip(&trace.steps) {
            assert_eq!(t.iterations, 1, "{}", model.kind());
            assert!(s.u.amax() < 1e-12, "{}", model.kind());
        }
    }
}

#[test]
fn pod_galerkin_consistency() {
    let f = fixture();
    let model = train_pod(&f.snapshots, Truncation::Fixed(4)).unwrap();
    let psi = &model.basis.psi;
    let path = &f.paths[3];
    let (states, trace) = rom_solve_pod(&model, &f.problem, &path.h_steps, &settings()).unwrap();
    assert_eq!(trace.steps.len(), 4);
    assert_eq!(trace.linearise_calls, 0);
    for (n, s) in states.iter().enumerate() {
        // the state lives in the span and the projected residual vanishes
        assert!((psi * (psi.transpose() * &s.u) - &s.u).amax() < 1e-12 * (1.0 + s.u.amax()));
        assert!((psi.transpose() * &s.u - &s.y).amax() < 1e-10 * (1.0 + s.y.amax()));
        let g = f.problem.residual(&s.u, &path.h_steps[n]).unwrap();
        assert!((psi.transpose() * g).amax() < settings().res_max);
        assert!(trace.steps[n].iterations >= 1);
    }
}

#[test]
fn full_rank_pod_reproduces_training_paths() {
    let f = fixture();
    let rank = numerical_rank(&pod_eigenvalues(&f.snapshots.u).unwrap());
    assert_eq!(rank, 12);
    let model = train_pod(&f.snapshots, Truncation::Fixed(rank)).unwrap();
    for p in 0..3 {
        let (states, _) = rom_solve_pod(&model, &f.problem, &f.paths[p].h_steps, &settings()).unwrap();
        let u: Vec<DVector<f64>> = states.into_iter().map(|s| s.u).collect();
        let errs = relative_errors(&u, &f.reference[p]).unwrap();
        assert!(errs.iter().all(|&e| e < 1e-6), "{errs:?}");
    }
}

#[test]
fn single_cluster_lpod_is_pod_on_its_basis() {
    let f = fixture();
    let params = LpodParams { k: 1, r: 0.0, bounds: ClusterBounds { core_min: 1, min: 1, max: 13 }, max_restarts: 5 };
    let lpod = lpod_offline(&f.snapshots.u, &params, Truncation::Fixed(4), &mut RngStream::new(2)).unwrap();
    let pod = PodModel { basis: PodBasis { psi: lpod.bases[0].psi.clone(), eigenvalues: lpod.bases[0].eigenvalues.clone(), d: 4 } };
    let path = &f.paths[3].h_steps;
    let (a, ta) = rom_solve_lpod(&lpod, &f.problem, path, &settings()).unwrap();
    let (b, tb) = rom_solve_pod(&pod, &f.problem, path, &settings()).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(rel(&x.u, &y.u) < 1e-12);
    }
    for (x, y) in ta.steps.iter().zip(&tb.steps) {
        assert_eq!(x.iterations, y.iterations);
        assert_eq!(x.clusters, vec![0; x.iterations]);
        assert!(!x.zigzag);
    }
}

#[test]
fn lpod_trace_records_clusters() {
    let f = fixture();
    let params = LpodParams { k: 3, r: 1.0, bounds: ClusterBounds { core_min: 2, min: 6, max: 13 }, max_restarts: 50 };
    let lpod = lpod_offline(&f.snapshots.u, &params, Truncation::Fixed(3), &mut RngStream::new(4)).unwrap();
    let (_, trace) = rom_solve_lpod(&lpod, &f.problem, &f.paths[0].h_steps, &settings()).unwrap();
    for s in &trace.steps {
        assert_eq!(s.clusters.len(), s.iterations);
        assert!(s.clusters.iter().all(|&c| c < 3));
    }
    let csv = trace.csv_rows(7);
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("7,1,"));
}

#[test]
fn qr_does_not_change_the_solution() {
    let f = fixture();
    for method in [EmbeddingMethod::Lem, EmbeddingMethod::Lle] {
        for lin in [Linearisation::Local, Linearisation::Global] {
            let with = ManlParams { linearisation: lin, ..manl_params(method, 3) };
            let without = ManlParams { orthonormalise: false, ..with };
            let a = train_manl(&f.snapshots.u, 0, &with).unwrap();
            let b = train_manl(&f.snapshots.u, 0, &without).unwrap();
            let path = &f.paths[3].h_steps;
            let (sa, ta) = rom_solve_manl(&a, &f.problem, path, &settings()).unwrap();
            let (sb, tb) = rom_solve_manl(&b, &f.problem, path, &settings()).unwrap();
            for (x, y) in sa.iter().zip(&sb) {
                assert!(rel(&x.u, &y.u) < 1e-6, "{method:?} {lin:?}");
                assert!((&x.y - &y.y).amax() < 1e-6 * (1.0 + y.y.amax()));
            }
            // the stopping test sees the same subspace either way
            let its = |t: &manrom::rom::SolveTrace| t.steps.iter().map(|s| s.iterations).collect::<Vec<_>>();
            assert_eq!(its(&ta), its(&tb), "{method:?} {lin:?}");
            // one linearisation before the first iteration, one after each
            let expect: usize = match lin {
                Linearisation::Local => ta.steps.iter().map(|s| s.iterations + 1).sum(),
                Linearisation::Global => 0,
            };
            assert_eq!(ta.linearise_calls, expect);
        }
    }
}

#[test]
fn two_stage_at_full_rank_matches_single_stage() {
    let f = fixture();
    let rank = numerical_rank(&pod_eigenvalues(&f.snapshots.u).unwrap());
    let params = manl_params(EmbeddingMethod::Lem, 3);
    let two = two_stage_offline(&f.snapshots, rank, &params).unwrap();
    // the compression is an isometry on the snapshots
    let d_full = pairwise_dist2(&f.snapshots.u);
    let d_bar = pairwise_dist2(two.y_bar());
    assert!((&d_full - &d_bar).amax() < 1e-10 * d_full.amax());
    let one = train_manl(&f.snapshots.u, 0, &params).unwrap();
    for r in 0..3 {
        let a = one.y().row(r);
        let b = two.inner.y().row(r);
        let same = (a - b).amax().min((a + b).amax());
        assert!(same < 1e-6 * a.amax(), "row {r}");
    }
    let path = &f.paths[3].h_steps;
    let (sa, _) = rom_solve_manl(&one, &f.problem, path, &settings()).unwrap();
    let (sb, tb) = rom_solve_two_stage(&two, &f.problem, path, &settings()).unwrap();
    for (x, y) in sa.iter().zip(&sb) {
        assert!(rel(&y.u, &x.u) < 1e-6);
    }
    assert!(tb.linearise_calls > 0);
    assert!(two_stage_offline(&f.snapshots, 3, &params).is_err());
}

#[test]
fn dimension_reporting() {
    let f = fixture();
    let m = RomModel::Manl(train_manl(&f.snapshots.u, 0, &manl_params(EmbeddingMethod::Lle, 2)).unwrap());
    assert_eq!((m.kind(), m.dim()), ("manl", 2));
    let p = RomModel::Pod(train_pod(&f.snapshots, Truncation::Fixed(5)).unwrap());
    assert_eq!((p.kind(), p.dim()), ("pod", 5));
}

#[test]
fn degenerate_neighbourhood_and_iteration_cap() {
    let f = fixture();
    let params = ManlParams { n_lin: 3, ..manl_params(EmbeddingMethod::Lem, 3) };
    let m = train_manl(&f.snapshots.u, 0, &params).unwrap();
    let r = rom_solve_manl(&m, &f.problem, &f.paths[3].h_steps, &settings());
    assert!(matches!(r, Err(Error::SingularNeighborhood { n: 3, d: 3 })));
    let pod = train_pod(&f.snapshots, Truncation::Fixed(4)).unwrap();
    let capped = SolverSettings { max_iterations: 1, ..settings() };
    let r = rom_solve_pod(&pod, &f.problem, &f.paths[3].h_steps, &capped);
    assert!(matches!(r, Err(Error::NoConvergence { step: 1, iterations: 1, .. })), "{r:?}");
}
