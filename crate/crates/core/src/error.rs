use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum EviError {
    /// A caller supplied an argument outside the operation's contract.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An operation was requested on an object in the wrong state.
    #[error("invalid state: {0}")]
    State(String),

    /// Training produced a non-finite value.
    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, EviError>;

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(EviError::Argument(msg.into()))
}

pub(crate) fn state_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(EviError::State(msg.into()))
}
