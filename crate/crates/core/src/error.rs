use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SigdexError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("capacity exhausted: no free signature id <= {0}")]
    CapacityExhausted(u64),
    #[error("format error: {0}")]
    Format(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl SigdexError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        SigdexError::InvalidInput(msg.into())
    }
    pub fn format(msg: impl Into<String>) -> Self {
        SigdexError::Format(msg.into())
    }
    pub fn internal(msg: impl Into<String>) -> Self {
        SigdexError::Internal(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, SigdexError>;
