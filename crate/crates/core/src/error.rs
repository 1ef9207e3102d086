use std::io;

use thiserror::Error;

/// A payload or request that fails its schema.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {message}")]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("invalid event: {0}")]
    Validation(#[from] ValidationError),
    #[error("event log i/o: {0}")]
    Io(#[from] io::Error),
    #[error("event log line {line}: {message}")]
    Corrupt { line: usize, message: String },
}

impl StoreError {
    /// Storage failures may succeed on retry; validation failures never will.
    pub fn is_retriable(&self) -> bool {
        matches!(self, StoreError::Io(_))
    }
}

/// Why a state transition was refused.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct TransitionError(pub String);

impl TransitionError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

impl From<ValidationError> for TransitionError {
    fn from(e: ValidationError) -> Self {
        Self(e.to_string())
    }
}
