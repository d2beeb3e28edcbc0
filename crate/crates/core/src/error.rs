use std::path::PathBuf;

/// Failures raised anywhere in the library.
///
/// Every variant carries a stable short code via [`Error::code`], which the CLI
/// prints on exit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("pore {index} intersects the outer boundary")]
    PoreTouchesBoundary { index: usize },
    #[error("node {node} has no periodic partner")]
    UnpairedBoundaryNode { node: usize },
    #[error("non-positive Jacobian J = {j:e}{}{}",
        element.map(|e| format!(" in element {e}")).unwrap_or_default(),
        step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    NonPositiveJacobian { j: f64, element: Option<usize>, step: Option<usize> },
    #[error("no convergence at step {step} after {iterations} iterations (residual {residual:e})")]
    NoConvergence { step: usize, iterations: usize, residual: f64 },
    #[error("requested {requested} modes but numerical rank is {rank}")]
    RankDeficient { requested: usize, rank: usize },
    #[error("negative covariance eigenvalue {0:e}")]
    NegativeEigenvalue(f64),
    #[error("k-means failed to meet the core size after {restarts} restarts")]
    ClusteringFailed { restarts: usize },
    #[error("neighbourhood graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },
    #[error("node {node} has zero degree")]
    ZeroDegreeNode { node: usize },
    #[error("local Gram system of node {node} is singular")]
    SingularLocalSystem { node: usize },
    #[error("embedding Gram matrix is rank deficient")]
    RankDeficientEmbedding,
    #[error("local neighbourhood of {n} points cannot span {d} reduced coordinates")]
    SingularNeighborhood { n: usize, d: usize },
    #[error("reference solution has zero norm at index {index}")]
    ZeroReference { index: usize },
    #[error("linear solver failed: {0}")]
    LinearSolve(String),
    #[error("malformed container {path}: {reason}")]
    Container { path: PathBuf, reason: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::PoreTouchesBoundary { .. } => "PoreTouchesBoundary",
            Error::UnpairedBoundaryNode { .. } => "UnpairedBoundaryNode",
            Error::NonPositiveJacobian { .. } => "NonPositiveJacobian",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::NegativeEigenvalue(_) => "NegativeEigenvalue",
            Error::ClusteringFailed { .. } => "ClusteringFailed",
            Error::DisconnectedGraph { .. } => "DisconnectedGraph",
            Error::ZeroDegreeNode { .. } => "ZeroDegreeNode",
            Error::SingularLocalSystem { .. } => "SingularLocalSystem",
            Error::RankDeficientEmbedding => "RankDeficientEmbedding",
            Error::SingularNeighborhood { .. } => "SingularNeighborhood",
            Error::ZeroReference { .. } => "ZeroReference",
            Error::LinearSolve(_) => "LinearSolve",
            Error::Container { .. } => "MalformedContainer",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }

    /// Attach a load step to errors that carry one.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            Error::NonPositiveJacobian { j, element, .. } => Error::NonPositiveJacobian { j, element, step: Some(step) },
            Error::NoConvergence { iterations, residual, .. } => Error::NoConvergence { step, iterations, residual },
            other => other,
        }
    }

    /// Attach an element index to Jacobian failures.
    pub fn in_element(self, element: usize) -> Self {
        match self {
            Error::NonPositiveJacobian { j, step, .. } => Error::NonPositiveJacobian { j, element: Some(element), step },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
