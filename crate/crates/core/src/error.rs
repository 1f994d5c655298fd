use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum RieszError {
    /// A parameter violates a documented bound.
    #[error("domain error: {0}")]
    Domain(String),

    /// The kernel was evaluated at a coincident point.
    #[error("kernel is singular at r = {r}; use the self-term rule for coincident cells")]
    Singularity { r: f64 },

    /// An integral or trace that does not converge for the given exponents.
    #[error("divergent: {0}")]
    Divergent(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("rasterization selected no cells (h = {h}); refine the grid")]
    EmptyDomain { h: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("capacity exceeded: {n} cells exceeds the dense-assembly limit of {limit}")]
    Capacity { n: usize, limit: usize },

    /// Non-finite or otherwise unusable numerical input.
    #[error("data error: {0}")]
    Data(String),

    /// An operation was called without the inputs it needs.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("eigendecomposition failed to converge")]
    NoConvergence,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, RieszError>;
