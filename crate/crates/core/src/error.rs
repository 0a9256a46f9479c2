use thiserror::Error;

/// Errors raised by the sampling, reference and spectral routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite evaluation at x = {x:?}")]
    Overflow { x: Vec<f64> },

    #[error("potential `{potential}` is missing metadata: {field}")]
    MissingMetadata { potential: String, field: &'static str },

    #[error("unknown potential id `{0}`")]
    UnknownPotential(String),

    #[error(
        "stepsize {lambda} exceeds lambda_max = {lambda_max}; lower the stepsize or set the override flag"
    )]
    StepsizeTooLarge { lambda: f64, lambda_max: f64 },

    #[error("all chains diverged (first non-finite state at step {first_nonfinite_step})")]
    Diverged { first_nonfinite_step: usize },

    #[error(
        "box too small: density at the {edge} edge is {ratio:.3e} of the interior maximum (limit 1e-12); widen the box"
    )]
    BoxTooSmall { edge: String, ratio: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("numerical failure: {message} (residuals {residuals:?})")]
    NumericalFailure { message: String, residuals: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
