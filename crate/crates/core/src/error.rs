use thiserror::Error;

/// Errors raised by the library.
///
/// Variants are grouped by the kind of contract that failed so the CLI can
/// map them onto exit codes: parameter and size problems are precondition
/// failures, serialization problems are configuration failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("instance too large: {0}")]
    Size(String),

    #[error("unknown item `{0}`")]
    UnknownItem(String),

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("payoff entry {index} = {value} outside [0, 1]")]
    PayoffRange { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("horizon exceeded: all {0} rounds already played")]
    HorizonExceeded(usize),

    #[error("point outside domain at coordinate {coord}: {value} not in [{lo}, {hi}]")]
    OutsideDomain {
        coord: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("linear optimizer {index} violated its contract: {reason}")]
    ContractViolation { index: usize, reason: String },

    #[error("output space too large for full-sequence events ({outcomes} outcomes); use per-round granularity")]
    Granularity { outcomes: f64 },

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors that stem from a malformed or unreadable config/stream
    /// document rather than from an algorithm precondition.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Json(_) | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
