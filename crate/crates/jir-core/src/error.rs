use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed file contents (bad magic, truncated payload, bad header).
    #[error("format error: {0}")]
    Format(String),

    /// Violated invariant or precondition on in-memory values.
    #[error("validation error: {0}")]
    Validation(String),

    /// Bad configuration: unknown keys, missing inputs, invalid settings.
    #[error("config error: {0}")]
    Config(String),

    /// Non-finite values where finite numbers are required.
    #[error("numerical error: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
