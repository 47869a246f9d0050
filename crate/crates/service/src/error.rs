use atlas_core::{Error, ValidationReport};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

/// Body of every failed request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub kind: String,
    pub detail: String,
    /// Present on rejected dump uploads.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ValidationReport>,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &str, detail: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            kind: kind.to_string(),
            detail: detail.into(),
            report: None,
        }
    }

    pub fn bad_request(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", detail)
    }

    pub fn not_found(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", detail)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let detail = e.to_string();
        match e {
            Error::Config(_) | Error::Input(_) | Error::Json(_) => Self::bad_request(detail),
            Error::Range(_) => Self::new(StatusCode::NOT_FOUND, "range", detail),
            Error::NotFound(_) => Self::not_found(detail),
            Error::Unavailable(_) => Self::new(StatusCode::NOT_FOUND, "unavailable", detail),
            Error::Conflict(_) => Self::new(StatusCode::CONFLICT, "conflict", detail),
            Error::Validation(report) => Self {
                report: Some(*report),
                ..Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", detail)
            },
            Error::DegenerateRow { .. } | Error::Io(_) => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", detail)
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}
