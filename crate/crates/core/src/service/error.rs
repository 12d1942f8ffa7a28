use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::cohort::CohortError;
use crate::dsl::QueryError;
use crate::vis::VisError;
use crate::wrangler::{WranglerError, WranglerErrorKind};

/// JSON error body that always carries `kind` and `message`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Map<String, Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        let mut body = Map::new();
        body.insert("kind".into(), kind.into());
        body.insert("message".into(), Value::String(message.into()));
        ApiError { status, body }
    }

    /// Starts from the serialized error's own fields.
    fn from_serialized(status: StatusCode, kind: &str, message: String, err: &impl Serialize) -> Self {
        let mut body = match serde_json::to_value(err) {
            Ok(Value::Object(m)) => m,
            Ok(other) => Map::from_iter([("detail".to_owned(), other)]),
            Err(_) => Map::new(),
        };
        body.insert("kind".into(), kind.into());
        body.insert("message".into(), message.into());
        ApiError { status, body }
    }

    pub fn bad_request(kind: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, kind, message)
    }

    pub fn not_found(kind: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, kind, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "InternalError", message)
    }

    pub fn kind(&self) -> &str {
        self.body.get("kind").and_then(Value::as_str).unwrap_or_default()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(Value::Object(self.body))).into_response()
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        Self::from_serialized(StatusCode::BAD_REQUEST, e.kind(), e.to_string(), &e)
    }
}

impl From<VisError> for ApiError {
    fn from(e: VisError) -> Self {
        let status = match e {
            VisError::UnknownUid(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, e.kind(), e.to_string())
    }
}

impl From<CohortError> for ApiError {
    fn from(e: CohortError) -> Self {
        let status = match &e {
            CohortError::UnknownCohort { .. } | CohortError::UnknownParent { .. } => StatusCode::NOT_FOUND,
            CohortError::ReplayError { .. } | CohortError::DuplicateId { .. } => StatusCode::BAD_REQUEST,
            CohortError::Sort(VisError::UnknownUid(_)) => StatusCode::NOT_FOUND,
            CohortError::Sort(_) => StatusCode::BAD_REQUEST,
            CohortError::IoError { .. } | CohortError::InvariantViolation(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::from_serialized(status, e.kind(), e.to_string(), &e)
    }
}

impl From<WranglerError> for ApiError {
    fn from(e: WranglerError) -> Self {
        let status = match e.kind {
            WranglerErrorKind::ProviderFailure => StatusCode::BAD_GATEWAY,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::from_serialized(status, e.kind.as_str(), e.to_string(), &e)
    }
}
