use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use gsfill_core::Error;
use serde_json::json;

/// JSON error body `{"error": {"code", "message", "stage"?}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub stage: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            stage: None,
        }
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", what)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_argument", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let stage = match &e {
            Error::Stage { stage, .. } => Some(stage.to_string()),
            _ => None,
        };
        let (status, code) = match e.root() {
            Error::Parse { .. } => (StatusCode::BAD_REQUEST, "parse_error"),
            Error::Schema(_) => (StatusCode::BAD_REQUEST, "schema_error"),
            Error::UnsupportedModel(_) => (StatusCode::BAD_REQUEST, "unsupported_model"),
            Error::InvalidArgument(_) => (StatusCode::BAD_REQUEST, "invalid_argument"),
            Error::Image(_) => (StatusCode::BAD_REQUEST, "image_error"),
            Error::Io(_) => (StatusCode::BAD_REQUEST, "io_error"),
            Error::DegenerateDepth(_) => (StatusCode::UNPROCESSABLE_ENTITY, "degenerate_depth"),
            Error::EmptyResult(_) => (StatusCode::UNPROCESSABLE_ENTITY, "empty_result"),
            Error::Backend(_) => (StatusCode::UNPROCESSABLE_ENTITY, "backend_failed"),
            Error::OptimizationDiverged { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "optimization_diverged"),
            Error::Stage { .. } => unreachable!("root strips stage tags"),
        };
        Self {
            status,
            code,
            message,
            stage,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "code": self.code, "message": self.message });
        if let Some(stage) = self.stage {
            body["stage"] = stage.into();
        }
        (self.status, Json(json!({ "error": body }))).into_response()
    }
}

pub type ApiResult<T> = std::result::Result<T, ApiError>;

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "parse_error", r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(r: PathRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

/// `axum::Json` with JSON error bodies on rejection.
#[derive(Debug, FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct ApiJson<T>(pub T);

#[derive(Debug, FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
pub struct ApiQuery<T>(pub T);

#[derive(Debug, FromRequestParts)]
#[from_request(via(axum::extract::Path), rejection(ApiError))]
pub struct ApiPath<T>(pub T);
