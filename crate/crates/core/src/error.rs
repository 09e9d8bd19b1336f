use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CarnotError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("degenerate frame at lambda = {lambda:?}: rank {rank} below generic rank {generic}")]
    Degenerate {
        lambda: Vec<f64>,
        rank: usize,
        generic: usize,
    },
    #[error("accuracy target not met: {0}")]
    Accuracy(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, CarnotError>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(CarnotError::Argument(msg.into()))
}

pub(crate) fn unsupported<T>(msg: impl Into<String>) -> Result<T> {
    Err(CarnotError::Unsupported(msg.into()))
}
