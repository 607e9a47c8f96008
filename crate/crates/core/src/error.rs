use thiserror::Error;

/// Errors raised across the solver toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    /// A downdate or factorization produced an eigenvalue below the clamp threshold.
    #[error("inconsistent design state: pivot {pivot:e} below clamp threshold {threshold:e}")]
    InconsistentState { pivot: f64, threshold: f64 },

    #[error("matrix rank {rank} is too low (need at least {required})")]
    RankTooLow { rank: usize, required: usize },

    #[error("experiment {0:?} is not in the experiment space")]
    Infeasible(Vec<u32>),

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("enumeration cap exceeded: {needed} > {cap}")]
    CapExceeded { needed: u128, cap: u128 },

    #[error("model order {0} is not supported by the linearization (max 2)")]
    UnsupportedOrder(u32),

    #[error("iteration cap of {0} reached")]
    IterationCap(usize),

    #[error("LP relaxation failed: {0}")]
    Lp(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("bound is invalid: {0}")]
    InvalidBound(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
