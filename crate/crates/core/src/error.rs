use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid primitive: {0}")]
    InvalidPrimitive(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("index out of bounds: {0}")]
    Index(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("image encoding: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

pub(crate) fn format_err(what: &'static str, detail: impl Into<String>) -> CoreError {
    CoreError::Format {
        what,
        detail: detail.into(),
    }
}
