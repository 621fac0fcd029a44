use thiserror::Error;

/// Errors raised by the toolkit.
///
/// The variants are coarse on purpose: the command-line front end maps each
/// of them onto a distinct exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid behavior: {0}")]
    InvalidBehavior(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("size cap exceeded: {what} needs {needed}, cap is {cap}")]
    CapExceeded { what: String, needed: u128, cap: u128 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
