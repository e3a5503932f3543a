use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value fell outside its mathematical domain (a context coordinate
    /// outside `[0, 1]`, a loss outside `[0, 1]`, a nonpositive rate, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// `update` was called without a matching, still-pending decision.
    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("expert enumeration needs {needed} experts, cap is {cap}")]
    Capacity { needed: u128, cap: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
