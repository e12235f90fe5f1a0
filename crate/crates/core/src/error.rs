use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel support under-resolved: no lattice offsets within cutoff {cutoff} at spacing {spacing}")]
    KernelUnderResolved { cutoff: f64, spacing: f64 },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("invalid cell problem: {0}")]
    InvalidCellProblem(String),

    #[error("surface tension table: {0}")]
    Table(String),

    #[error("invalid phase: {0}")]
    InvalidPhase(String),

    #[error("recovery construction: {0}")]
    Recovery(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
