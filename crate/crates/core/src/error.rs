use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} outside materialized range [-{radius}, {radius}]; {hint}")]
    OutOfRange {
        index: i64,
        radius: i64,
        hint: String,
    },

    #[error("operation requires the {expected} regime")]
    Regime { expected: &'static str },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    /// A numerical premise (e.g. eventual monotonicity) failed on the probe range.
    #[error("diagnostic: {0}")]
    Diagnostic(String),

    #[error("exact oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error("tilt infeasible: {0}")]
    TiltInfeasible(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
