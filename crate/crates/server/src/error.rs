use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use uuid::Uuid;

use uuis_core::Error;

/// JSON error body returned for every failed request.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorBody {
    pub status: u16,
    pub code: String,
    pub message: String,
    pub correlation_id: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
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

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn internal(detail: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", detail.to_string())
    }

    pub fn status(&self) -> StatusCode {
        self.status
    }
}

pub fn status_for(err: &Error) -> StatusCode {
    match err {
        Error::InvalidCredentials | Error::Unauthenticated => StatusCode::UNAUTHORIZED,
        Error::Forbidden(_) => StatusCode::FORBIDDEN,
        Error::NotFound { .. } => StatusCode::NOT_FOUND,
        Error::Validation(_) | Error::Cycle(_) => StatusCode::BAD_REQUEST,
        Error::Duplicate(_)
        | Error::StaleVersion { .. }
        | Error::IllegalTransition { .. }
        | Error::GuardedDelete { .. }
        | Error::Capacity(_) => StatusCode::CONFLICT,
        Error::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        ApiError {
            status: status_for(&err),
            code: err.code(),
            message: err.to_string(),
        }
    }
}

/// Builds the response for a server fault: full detail goes to the log, the
/// client only sees the correlation id.
pub fn internal_response(detail: &str) -> Response {
    ApiError::internal(detail).into_response()
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let correlation_id = Uuid::new_v4().to_string();
        let message = if self.status.is_server_error() {
            tracing::error!(correlation_id = %correlation_id, code = self.code, detail = %self.message, "request failed");
            "An internal error occurred. Quote the correlation id when reporting it.".to_string()
        } else {
            tracing::debug!(correlation_id = %correlation_id, code = self.code, message = %self.message, "request rejected");
            self.message
        };
        let body = ErrorBody {
            status: self.status.as_u16(),
            code: self.code.to_string(),
            message,
            correlation_id,
        };
        (self.status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        assert_eq!(status_for(&Error::Unauthenticated), StatusCode::UNAUTHORIZED);
        assert_eq!(status_for(&Error::forbidden("x")), StatusCode::FORBIDDEN);
        assert_eq!(status_for(&Error::validation("x")), StatusCode::BAD_REQUEST);
        assert_eq!(status_for(&Error::not_found("asset", 1)), StatusCode::NOT_FOUND);
        assert_eq!(
            status_for(&Error::IllegalTransition { action: "approve", status: "EXECUTED" }),
            StatusCode::CONFLICT
        );
    }
}
