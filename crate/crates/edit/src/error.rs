use splathead_core::CoreError;
use splathead_neural::NeuralError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EditError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("session storage: {0}")]
    Storage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = EditError> = std::result::Result<T, E>;
