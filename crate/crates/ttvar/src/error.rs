use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum TtvarError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, TtvarError>;

impl TtvarError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        TtvarError::Invalid(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        TtvarError::Numerical(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        TtvarError::Config(msg.into())
    }
}
