use thiserror::Error;

/// Failure of an external scoring or tagging backend.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    /// Network-level failure. `retryable` is set for connection errors,
    /// timeouts and 5xx/429 responses.
    #[error("transport error: {message}")]
    Transport { message: String, retryable: bool },
    /// The backend answered, but the payload violates the wire contract.
    #[error("malformed backend response: {0}")]
    Malformed(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport { retryable: true, .. })
    }
}
