use thiserror::Error;

/// Failure modes shared by every module of the library.
#[derive(Debug, Error)]
pub enum GyError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("axis {axis} out of range for complex dimension {n}")]
    AxisOutOfRange { axis: usize, n: usize },
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("degenerate metric at node {node}: minimum eigenvalue {min_eig:e}")]
    DegenerateMetric { node: usize, min_eig: f64 },
    #[error("positivity violated: {0}")]
    Positivity(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("critical parameter: C_t = 0 at t = {t} (n = {n})")]
    CriticalParameter { t: f64, n: usize },
    #[error("wrong branch: {0}")]
    WrongBranch(String),
    #[error("unsupported branch: {0}")]
    UnsupportedBranch(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("continuation failed: {message}")]
    ContinuationFailure {
        message: String,
        trace: Box<crate::yamabe::SolverTrace>,
    },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GyError>;
