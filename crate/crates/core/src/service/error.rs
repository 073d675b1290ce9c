use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::graph::GraphError;

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
    #[serde(skip)]
    status: Option<u16>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
            details: None,
            status: Some(status.as_u16()),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn status(&self) -> StatusCode {
        self.status
            .and_then(|s| StatusCode::from_u16(s).ok())
            .unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
    }
}

impl From<GraphError> for ApiError {
    fn from(err: GraphError) -> Self {
        let (status, code) = match &err {
            GraphError::UnknownNode(_) => (StatusCode::NOT_FOUND, "unknown_node"),
            GraphError::UnknownEdge(_) => (StatusCode::NOT_FOUND, "unknown_edge"),
            GraphError::ForbiddenSelfLoop(_) => (StatusCode::CONFLICT, "forbidden_self_loop"),
            GraphError::EmptyName => (StatusCode::BAD_REQUEST, "empty_name"),
            GraphError::InvalidRelation(_) => (StatusCode::BAD_REQUEST, "invalid_relation"),
            GraphError::InvalidPropertyValue(_) => (StatusCode::BAD_REQUEST, "invalid_property_value"),
            GraphError::IoFailure(_) | GraphError::MalformedRecord { .. } => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        ApiError::new(status, code, err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}
