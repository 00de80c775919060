use thiserror::Error;

/// Errors produced by model construction and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// A state or level is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The state space would exceed the configured size cap.
    #[error("state space of {states} states exceeds the cap of {cap}")]
    SizeCap { states: usize, cap: usize },

    /// A linear system or block could not be factorized.
    #[error("singular matrix in {context}")]
    Singular { context: String },

    /// An iteration did not meet its stopping rule.
    #[error("no convergence after {iterations} iterations (last delta {last_delta:e})")]
    NoConvergence { iterations: usize, last_delta: f64 },

    /// The batch-service queue is not positive recurrent.
    #[error(
        "queue is unstable: lambda + r2*b = {up_drift} is not below r1*b = {down_drift}"
    )]
    Unstable { up_drift: f64, down_drift: f64 },

    /// An internal consistency identity failed.
    #[error("consistency check failed: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
