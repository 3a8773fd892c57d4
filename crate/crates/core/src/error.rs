use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received a parameter that violates its
    /// precondition.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An argument lies outside the domain where the quantity is defined.
    #[error("{quantity} = {value} is outside the domain: {reason}")]
    Domain {
        quantity: &'static str,
        value: f64,
        reason: String,
    },

    /// The two outgoing solutions became linearly dependent.
    #[error("degenerate Wronskian at omega = {omega}: relative magnitude {relative:e}")]
    DegenerateWronskian { omega: f64, relative: f64 },

    /// Adaptive quadrature ran out of subdivisions.
    #[error(
        "quadrature did not converge: estimate {estimate:e}, error {error:e} above tolerance {tolerance:e}"
    )]
    Quadrature {
        estimate: f64,
        error: f64,
        tolerance: f64,
    },

    /// The operation was called on an object of the wrong kind.
    #[error("usage error: {0}")]
    Usage(String),

    /// Full-space propagation would exceed the configured amplitude cap.
    #[error("exact propagation needs {required} amplitudes, above the cap of {cap}")]
    OracleUnavailable { required: u128, cap: usize },

    /// Krylov propagation could not reach the requested accuracy even with
    /// the smallest allowed internal step.
    #[error("Krylov propagation failed to converge at t = {time} (step {step:e})")]
    KrylovConvergence { time: f64, step: f64 },

    /// A LAPACK call failed.
    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(err: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
