use quinn_core::QuinnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] QuinnError),

    /// Bad flags or inputs the library never sees.
    #[error("{0}")]
    Usage(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_user_error() => 1,
            CliError::Core(_) | CliError::Internal(_) => 2,
        }
    }
}
