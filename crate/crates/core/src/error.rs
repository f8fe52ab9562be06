use thiserror::Error;

/// Errors raised by the library. The CLI maps each kind to an exit status.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite value {value} at x = {x} while evaluating {label}")]
    NonFinite { label: String, x: f64, value: f64 },

    #[error("missing operand: {0}")]
    MissingOperand(&'static str),

    #[error("not serializable: {0}")]
    NotSerializable(String),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
