use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use splathead_edit::EditError;
use thiserror::Error;

/// Machine-readable error codes carried by every error response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    InputError,
    NotFound,
    Busy,
    Capacity,
    StorageError,
    Internal,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    Input(String),
    #[error("no session '{0}'")]
    NotFound(String),
    #[error("session '{0}' is busy with another edit")]
    Busy(String),
    #[error("session capacity of {0} reached")]
    Capacity(usize),
    #[error("{0}")]
    Storage(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn code(&self) -> ErrorCode {
        match self {
            Self::Input(_) => ErrorCode::InputError,
            Self::NotFound(_) => ErrorCode::NotFound,
            Self::Busy(_) => ErrorCode::Busy,
            Self::Capacity(_) => ErrorCode::Capacity,
            Self::Storage(_) => ErrorCode::StorageError,
            Self::Internal(_) => ErrorCode::Internal,
        }
    }

    fn status(&self) -> StatusCode {
        match self {
            Self::Input(_) => StatusCode::BAD_REQUEST,
            Self::NotFound(_) => StatusCode::NOT_FOUND,
            Self::Busy(_) => StatusCode::CONFLICT,
            Self::Capacity(_) => StatusCode::SERVICE_UNAVAILABLE,
            Self::Storage(_) | Self::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    /// Classifies an editing error: bad images and shapes are the caller's
    /// fault, storage problems are reported as such.
    pub fn from_edit(e: EditError) -> Self {
        use splathead_neural::NeuralError;
        match e {
            EditError::Storage(m) => Self::Storage(m),
            EditError::Io(e) => Self::Storage(e.to_string()),
            EditError::Dimension(m) | EditError::Neural(NeuralError::Input(m)) => Self::Input(m),
            EditError::Core(splathead_core::CoreError::InvalidCamera(m)) => Self::Input(m),
            other => Self::Internal(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ErrorBody { code: self.code(), message: self.to_string() };
        (self.status(), Json(serde_json::json!({ "error": body }))).into_response()
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
