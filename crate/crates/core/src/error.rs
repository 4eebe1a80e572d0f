use thiserror::Error;

/// Failures raised anywhere in the crate.
///
/// The variants map one-to-one onto the command-line exit codes: configuration
/// problems, violated modelling hypotheses, and numerical breakdowns.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("step {step} at t = {t:.6e} failed: {reason}")]
    StepFailure { step: usize, t: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn assumption(msg: impl Into<String>) -> Self {
        Error::Assumption(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
