use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use tse_core::CoreError;
use tse_library::ingest::IngestError;
use tse_library::LibraryError;

/// JSON error body: a stable code, a human message and, for metadata
/// validation, the offending fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status: status.as_u16(), code: code.into(), message: message.into(), fields: Vec::new() }
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found() -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", "no such resource")
    }

    pub fn too_large(limit: usize) -> Self {
        Self::new(StatusCode::PAYLOAD_TOO_LARGE, "payload_too_large", format!("request body exceeds {limit} bytes"))
    }
}

fn status_of(e: &LibraryError) -> StatusCode {
    match e {
        LibraryError::NotFound | LibraryError::Core(CoreError::NotFound) => StatusCode::NOT_FOUND,
        LibraryError::Validation(_) | LibraryError::Ingest(_) | LibraryError::InvalidParameter(_) => {
            StatusCode::BAD_REQUEST
        }
        LibraryError::NotOptedIn => StatusCode::CONFLICT,
        LibraryError::Core(
            CoreError::LibraryTooSmall { .. } | CoreError::EmptyLibrary | CoreError::TooFewPoints { .. },
        ) => StatusCode::CONFLICT,
        LibraryError::Core(_) => StatusCode::UNPROCESSABLE_ENTITY,
        LibraryError::SinkUnavailable(_) | LibraryError::Locked => StatusCode::SERVICE_UNAVAILABLE,
        LibraryError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<LibraryError> for ApiError {
    fn from(e: LibraryError) -> Self {
        let mut api = ApiError::new(status_of(&e), e.code(), e.to_string());
        if let LibraryError::Validation(v) = &e {
            api.fields = v.field_names().iter().map(|s| s.to_string()).collect();
        }
        api
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        LibraryError::Ingest(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}
