use thiserror::Error;

/// A value that violates a type invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct InvalidValue(String);

impl InvalidValue {
    pub fn new(message: impl Into<String>) -> InvalidValue {
        InvalidValue(message.into())
    }

    pub fn message(&self) -> &str {
        &self.0
    }
}
