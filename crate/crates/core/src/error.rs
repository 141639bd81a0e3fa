use thiserror::Error;

/// Errors raised by the estimation and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {message} (last valid point {last_point:?})")]
    NumericFailure {
        message: String,
        last_point: Vec<f64>,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("zero-magnitude sample at index {0}")]
    ZeroSample(usize),

    #[error("unsupported modulation for {method}: {kind}")]
    UnsupportedModulation { method: String, kind: String },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("ill-conditioned covariance (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("scan resolution insufficient: {0}")]
    Resolution(String),

    #[error("missing calibration: {0}")]
    MissingCalibration(String),

    #[error("table format error at line {line}: {message}")]
    TableFormat { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
