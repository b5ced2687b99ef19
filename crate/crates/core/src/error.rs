//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// No strictly feasible point exists (or was supplied) for an inner solve.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The interior-point method failed to converge.
    #[error("numerical failure: {message} (barrier weight {barrier_weight:.3e}, newton iterations {newton_iterations}, decrement {decrement:.3e})")]
    NumericalFailure {
        message: String,
        barrier_weight: f64,
        newton_iterations: usize,
        decrement: f64,
    },

    /// Rounding was requested on a point whose assignment variables are not
    /// close to binary.
    #[error("assignment variables not near-binary: max deviation {max_deviation:.3e} exceeds tolerance {tolerance:.3e}")]
    NotNearBinary { max_deviation: f64, tolerance: f64 },

    /// An enumeration would exceed the configured work cap.
    #[error("enumeration size cap exceeded: requires about {required:.3e} evaluations, cap is {cap:.3e}")]
    SizeCapExceeded { required: f64, cap: f64 },

    /// Malformed experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Too many per-trial solver failures during a sweep.
    #[error("solver failure rate {failed}/{total} exceeds the 5% threshold")]
    FailureThreshold { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
