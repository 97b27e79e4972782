use thiserror::Error;

use crate::mmot::MmotResult;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("problem size {size} exceeds the cap of {cap}")]
    SizeExceeded { size: u128, cap: u128 },

    #[error("point {point} lies within the assignment radius of nuclei {first} and {second}")]
    AmbiguousAssignment {
        point: usize,
        first: usize,
        second: usize,
    },

    #[error("singular density: {0}")]
    SingularDensity(String),

    #[error("no convergence after {iterations} iterations (marginal violation {violation:e})")]
    IterationLimit {
        iterations: usize,
        violation: f64,
        last: Box<MmotResult>,
    },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("table invalid at indices {indices:?}: {reason}")]
    TableInvalid { indices: Vec<usize>, reason: String },

    #[error("configuration rejected: {0}")]
    ConfigurationRejected(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
