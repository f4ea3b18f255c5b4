use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown element '{0}'")]
    UnknownElement(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("unsupported basis: {0}")]
    Basis(String),
    #[error("SCF did not converge after {iterations} iterations (residual {residual:.3e})")]
    ScfNotConverged { iterations: usize, residual: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Cholesky breakdown: residual diagonal {value:.3e} at composite index {index}")]
    CholeskyBreakdown { index: usize, value: f64 },
    #[error("pivot replay invalid: {0}")]
    ReplayInvalid(String),
    #[error("determinant space of dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("Davidson did not converge after {iterations} iterations (residual {residual:.3e})")]
    DavidsonNotConverged { iterations: usize, residual: f64 },
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("optimizer stagnated at energy {energy:.10} (gradient norm {gradient:.3e})")]
    Stagnation {
        energy: f64,
        gradient: f64,
        params: Vec<f64>,
    },
    #[error("zero overlap between initial determinant and trial")]
    ZeroOverlap,
    #[error(
        "walker weight collapse: total weight {total:.3e} with {n_walkers} walkers at step {step}"
    )]
    WeightCollapse {
        total: f64,
        n_walkers: usize,
        step: usize,
    },
    #[error("need at least {needed} paired blocks, got {got}")]
    TooFewBlocks { needed: usize, got: usize },
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
