use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use arena_core::sandbox::SandboxError;
use arena_core::Error as CoreError;

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDoc {
    pub error: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn unauthorized(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", message)
    }

    pub fn forbidden(message: impl Into<String>) -> Self {
        Self::new(StatusCode::FORBIDDEN, "forbidden", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let message = e.to_string();
        let (status, code) = match &e {
            CoreError::NotFound { .. } => (StatusCode::NOT_FOUND, "not_found"),
            CoreError::NotJudgeable(_) => (StatusCode::NOT_FOUND, "not_judgeable"),
            CoreError::Duplicate { .. } => (StatusCode::CONFLICT, "duplicate"),
            CoreError::AttemptExhausted(_) => (StatusCode::CONFLICT, "attempt_exhausted"),
            CoreError::Ambiguous { .. } => (StatusCode::CONFLICT, "ambiguous"),
            CoreError::AlreadyTerminal(_) => (StatusCode::CONFLICT, "conflict"),
            CoreError::Forbidden(_) => (StatusCode::FORBIDDEN, "forbidden"),
            CoreError::Invalid(_) | CoreError::Malformed(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            CoreError::Sandbox(SandboxError::UnknownLanguage(_)) => (StatusCode::BAD_REQUEST, "bad_request"),
            CoreError::BadCredentials => (StatusCode::UNAUTHORIZED, "unauthorized"),
            CoreError::Inconclusive(_) => (StatusCode::UNPROCESSABLE_ENTITY, "inconclusive"),
            CoreError::Corrupt { .. } | CoreError::Scoring(_) | CoreError::Sandbox(_) | CoreError::Io(_) => {
                tracing::error!(error = %e, "request failed");
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        ApiError::new(status, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorDoc {
            error: self.code.to_owned(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
