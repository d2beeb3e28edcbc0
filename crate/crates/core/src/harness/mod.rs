//! Load paths, snapshot collection, error metrics, campaigns and persistence.

pub mod campaign;
pub mod config;
pub mod io;
pub mod metrics;
pub mod paths;

pub use campaign::{
    collect_snapshots, replay, run_campaign, run_cell, run_cells, snapshots_from, solve_references, train_method, ExperimentReport,
    PathOutcome, Prepared, ReportRow, REPORT_CSV_HEADER,
};
pub use config::{apply_override, CampaignConfig, Dims, MethodConfig, MethodName};
pub use io::{load_model, read_matrix, save_model, write_matrix, ModelManifest};
pub use metrics::{error_metrics, eigenvalue_decay_report, relative_errors, EigenDecay};
pub use paths::{generate_load_paths, LoadPath};
