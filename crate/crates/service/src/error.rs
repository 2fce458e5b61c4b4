use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use thiserror::Error;

use sdrift_core::error::FieldError;

#[derive(Debug, Serialize)]
pub struct FieldIssue {
    pub path: String,
    pub message: String,
}

impl From<&FieldError> for FieldIssue {
    fn from(e: &FieldError) -> Self {
        Self {
            path: e.path.clone(),
            message: e.message.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("no session with id `{0}`")]
    NotFound(String),

    #[error("{0}")]
    Conflict(String),

    #[error("unknown feature {unknown:?}; valid names are {valid:?}")]
    UnknownFeature { unknown: Vec<String>, valid: Vec<String> },

    #[error("invalid config")]
    InvalidConfig(Vec<FieldIssue>),

    #[error("{0}")]
    BadRequest(String),

    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::UnknownFeature { .. } | ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::InvalidConfig(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ApiError::NotFound(_) => "not_found",
            ApiError::Conflict(_) => "conflict",
            ApiError::UnknownFeature { .. } => "invalid_argument",
            ApiError::InvalidConfig(_) => "invalid_config",
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Internal(_) => "internal",
        }
    }
}

impl From<sdrift_core::Error> for ApiError {
    fn from(e: sdrift_core::Error) -> Self {
        use sdrift_core::Error as E;
        match e {
            E::Config(fields) => ApiError::InvalidConfig(fields.iter().map(FieldIssue::from).collect()),
            E::AwaitingAnnotation | E::NoPendingQuery => ApiError::Conflict(e.to_string()),
            E::InvalidArgument(_) | E::Row { .. } | E::Csv(_) | E::Json(_) | E::Io(_) => {
                ApiError::BadRequest(e.to_string())
            }
            other => ApiError::Internal(other.to_string()),
        }
    }
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    fields: Option<&'a [FieldIssue]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    valid_names: Option<&'a [String]>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            error: self.code(),
            message: self.to_string(),
            fields: match &self {
                ApiError::InvalidConfig(f) => Some(f),
                _ => None,
            },
            valid_names: match &self {
                ApiError::UnknownFeature { valid, .. } => Some(valid),
                _ => None,
            },
        };
        (self.status(), Json(body)).into_response()
    }
}
