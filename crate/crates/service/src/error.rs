use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use emoprofile_core::Error as CoreError;
use serde::Serialize;

/// JSON error body: `{"error": kind, "message": text, "path"?: field}`.
#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, error: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error,
                message: message.into(),
                path: None,
            },
        }
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    pub fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message)
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        use CoreError as E;
        let (status, kind) = match &e {
            E::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            E::UnknownReference(_) => (StatusCode::NOT_FOUND, "unknown_reference"),
            E::BackendUnavailable { .. } => (StatusCode::BAD_GATEWAY, "backend_unavailable"),
            E::BackendProtocol(_) => (StatusCode::BAD_GATEWAY, "backend_protocol"),
            E::EmptySession => (StatusCode::CONFLICT, "empty_session"),
            E::MissingPolarityClass(_) => (StatusCode::CONFLICT, "missing_polarity_class"),
            E::SchemaViolation { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "schema_violation"),
            E::EmptyPrompt => (StatusCode::UNPROCESSABLE_ENTITY, "empty_text"),
            E::ReservedToken(_) => (StatusCode::UNPROCESSABLE_ENTITY, "reserved_token"),
            E::AllSamplesDiscarded { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "no_valid_samples"),
            E::EmptyCorpusAfterSegmentation => (StatusCode::UNPROCESSABLE_ENTITY, "empty_text"),
            E::UnknownLabel(_) | E::InvalidDistribution(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let path = match &e {
            E::SchemaViolation { path, .. } => Some(path.clone()),
            _ => None,
        };
        Self {
            status,
            body: ErrorBody {
                error: kind,
                message: e.to_string(),
                path,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::warn!("{}: {}", self.status, self.body.message);
        }
        (self.status, Json(self.body)).into_response()
    }
}
