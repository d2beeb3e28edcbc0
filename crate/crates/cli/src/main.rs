//! `mor`: mesh, solve, train, replay and campaign driver.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use nalgebra::{DMatrix, DVector};

use manrom::fem::FemProblem;
use manrom::harness::{
    eigenvalue_decay_report, generate_load_paths, load_model, read_matrix, replay, run_cells, save_model, snapshots_from,
    solve_references, train_method, write_matrix, CampaignConfig, LoadPath, Prepared,
};
use manrom::manifold::correlation_dimension;
use manrom::mesh::{build_periodic_pairing, MeshFile};
use manrom::pod::{RngStream, SnapshotSet};
use manrom::rom::TRACE_CSV_HEADER;
use manrom::Error;

#[derive(Parser, Debug)]
#[command(name = "mor", version, about = "Manifold-learning and POD reduced order models for periodic RVEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Campaign config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Cap on worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Dot-path config override, e.g. `paths.seed=7`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the carved, periodically paired mesh as JSON.
    Mesh(Common),
    /// Write the random load paths as JSON.
    Paths(Common),
    /// Full solves on all paths; writes training snapshots and reference states.
    Solve(Common),
    /// Fit every configured (method, d) model.
    Train {
        #[command(flatten)]
        common: Common,
        /// Training snapshots from `solve`; solved afresh when absent.
        #[arg(long)]
        snapshots: Option<PathBuf>,
    },
    /// Replay all paths through a stored model.
    RomSolve {
        #[command(flatten)]
        common: Common,
        /// Model directory written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Reference states from `solve`; solved afresh when absent.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Correlation-dimension estimate of a snapshot container.
    Corrdim {
        #[arg(long)]
        snapshots: PathBuf,
        #[arg(long, default_value_t = 60)]
        grid: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Train and replay every configured cell; writes report.csv.
    Campaign(Common),
    /// Pretty-print a campaign CSV.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Domain(e.into())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn set_threads(n: Option<usize>) {
    if let Some(n) = n {
        // fails only if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn load_config(c: &Common) -> CliResult<CampaignConfig> {
    let path = c.config.as_ref().ok_or_else(|| Failure::Usage("--config is required".into()))?;
    if !path.is_file() {
        return Err(Failure::Usage(format!("config file {} not found", path.display())));
    }
    Ok(CampaignConfig::load(path, &c.set)?)
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> CliResult<()> {
    fs::write(path, serde_json::to_string_pretty(v).map_err(Error::from)? + "\n")?;
    info!("wrote {}", path.display());
    Ok(())
}

fn problem_and_paths(cfg: &CampaignConfig) -> CliResult<(FemProblem, Vec<LoadPath>)> {
    let mesh = cfg.mesh.build()?;
    let problem = FemProblem::new(&mesh, cfg.material.params()?, cfg.mesh.quadrature)?;
    let p = &cfg.paths;
    let paths = generate_load_paths(p.total(), &mut RngStream::new(p.seed), p.dh_lp, p.dh_ls, p.steps)?;
    Ok((problem, paths))
}

/// Columns path-major: path 0 steps 1..n, path 1 steps 1..n, ...
fn stack(reference: &[Vec<DVector<f64>>], dim: usize) -> DMatrix<f64> {
    let cols: Vec<&DVector<f64>> = reference.iter().flatten().collect();
    DMatrix::from_fn(dim, cols.len(), |i, j| cols[j][i])
}

fn unstack(m: &DMatrix<f64>, paths: usize, steps: usize) -> CliResult<Vec<Vec<DVector<f64>>>> {
    if m.ncols() != paths * steps {
        return Err(Failure::Domain(Error::Config(format!(
            "reference holds {} columns, config implies {paths} paths x {steps} steps",
            m.ncols()
        ))));
    }
    Ok((0..paths).map(|p| (0..steps).map(|n| m.column(p * steps + n).into_owned()).collect()).collect())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Mesh(c) => {
            set_threads(c.threads);
            let cfg = load_config(&c)?;
            prepare_out(&c.out)?;
            let mesh = cfg.mesh.build()?;
            let pairing = build_periodic_pairing(&mesh)?;
            write_json(&c.out.join("mesh.json"), &MeshFile::new(&mesh, &pairing))
        }
        Command::Paths(c) => {
            let cfg = load_config(&c)?;
            prepare_out(&c.out)?;
            let p = &cfg.paths;
            let paths = generate_load_paths(p.total(), &mut RngStream::new(p.seed), p.dh_lp, p.dh_ls, p.steps)?;
            write_json(&c.out.join("paths.json"), &paths)
        }
        Command::Solve(c) => {
            set_threads(c.threads);
            let cfg = load_config(&c)?;
            prepare_out(&c.out)?;
            let (problem, paths) = problem_and_paths(&cfg)?;
            let reference = solve_references(&problem, &paths, &cfg.solver.settings())?;
            let n = cfg.paths.n_train;
            let snaps = snapshots_from(&paths[..n], &reference[..n], problem.dim())?;
            write_matrix(&c.out.join("snapshots.mor"), &snaps.u)?;
            write_matrix(&c.out.join("reference.mor"), &stack(&reference, problem.dim()))?;
            fs::write(c.out.join("eigenvalues.csv"), eigenvalue_decay_report(&snaps.u)?.to_csv())?;
            Ok(())
        }
        Command::Train { common: c, snapshots } => {
            set_threads(c.threads);
            let cfg = load_config(&c)?;
            prepare_out(&c.out)?;
            let snaps = match snapshots {
                Some(path) => {
                    let u = read_matrix(&path)?;
                    let meta = vec![manrom::pod::SnapshotMeta { path: None, step: 0, h_bar: [[0.0; 3]; 3] }; u.ncols()];
                    SnapshotSet::new(u, meta)?
                }
                None => {
                    let (problem, paths) = problem_and_paths(&cfg)?;
                    let n = cfg.paths.n_train;
                    let reference = solve_references(&problem, &paths[..n], &cfg.solver.settings())?;
                    snapshots_from(&paths[..n], &reference, problem.dim())?
                }
            };
            for (i, m) in cfg.methods.iter().enumerate() {
                for d in m.d.values() {
                    let idx = ((i as u64) << 32) | d as u64;
                    let model = train_method(m, d, &snaps, &mut RngStream::derived(cfg.paths.seed, idx))?;
                    let dir = c.out.join(format!("{}_d{}", m.label(), d));
                    save_model(&dir, &model, &m.label(), cfg.paths.seed)?;
                    info!("wrote {}", dir.display());
                }
            }
            Ok(())
        }
        Command::RomSolve { common: c, model, reference } => {
            set_threads(c.threads);
            let cfg = load_config(&c)?;
            prepare_out(&c.out)?;
            let (rom, manifest) = load_model(&model)?;
            let (problem, paths) = problem_and_paths(&cfg)?;
            let settings = cfg.solver.settings();
            let reference = match reference {
                Some(p) => unstack(&read_matrix(&p)?, paths.len(), cfg.paths.steps)?,
                None => solve_references(&problem, &paths, &settings)?,
            };
            let outcomes = replay(&rom, &problem, &paths, &reference, &settings);
            let mut trace = String::from(TRACE_CSV_HEADER);
            let mut errors = String::from("path_id,step,rel_error,failure\n");
            for o in &outcomes {
                trace.push_str(&o.trace.csv_rows(o.path_id));
                if o.converged() {
                    for (n, e) in o.errors.iter().enumerate() {
                        errors.push_str(&format!("{},{},{e:e},\n", o.path_id, n + 1));
                    }
                } else if let Some(e) = &o.failure {
                    warn!("path {} failed: {e}", o.path_id);
                    errors.push_str(&format!("{},,,{}\n", o.path_id, e.code()));
                }
            }
            fs::write(c.out.join("trace.csv"), trace)?;
            fs::write(c.out.join("errors.csv"), errors)?;
            let ok = outcomes.iter().filter(|o| o.converged()).count();
            println!("{} d={}: {ok}/{} paths converged", manifest.label, manifest.d, outcomes.len());
            Ok(())
        }
        Command::Corrdim { snapshots, grid, out, threads } => {
            set_threads(threads);
            prepare_out(&out)?;
            let u = read_matrix(&snapshots)?;
            let est = correlation_dimension(&u, grid)?;
            fs::write(out.join("corrdim.csv"), est.to_csv())?;
            match est.plateau(0.2) {
                Some(p) => println!("plateau {p:.4}"),
                None => println!("plateau undefined"),
            }
            Ok(())
        }
        Command::Campaign(c) => {
            set_threads(c.threads);
            let cfg = load_config(&c)?;
            prepare_out(&c.out)?;
            let prep = Prepared::new(&cfg)?;
            fs::write(c.out.join("eigenvalues.csv"), eigenvalue_decay_report(&prep.snapshots.u)?.to_csv())?;
            let report = run_cells(&prep);
            fs::write(c.out.join("report.csv"), report.to_csv())?;
            write_json(&c.out.join("report.json"), &report)?;
            print!("{}", pretty(&report.to_csv())?);
            Ok(())
        }
        Command::Report { input } => {
            if !input.is_file() {
                return Err(Failure::Usage(format!("report file {} not found", input.display())));
            }
            print!("{}", pretty(&fs::read_to_string(&input)?)?);
            Ok(())
        }
    }
}

/// Column-aligned rendering of a CSV table.
fn pretty(text: &str) -> CliResult<String> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Failure::Domain(Error::Config(format!("bad CSV: {e}"))))?;
        rows.push(
            rec.iter()
                .map(|f| match f.parse::<f64>() {
                    Ok(v) if f.contains('.') || f.contains('e') || f == "NaN" => format!("{v:.4}"),
                    _ => f.to_string(),
                })
                .collect(),
        );
    }
    let ncols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..ncols).map(|j| rows.iter().filter_map(|r| r.get(j)).map(|s| s.len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in &rows {
        let line: Vec<String> = r.iter().enumerate().map(|(j, s)| format!("{:>w$}", s, w = widths[j])).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MOR_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("ERROR {}: {}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
