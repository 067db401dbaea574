use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use dp_planner::Error;
use serde::{Deserialize, Serialize};

use crate::store::StoreError;

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_path: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.to_owned(),
                message: message.into(),
                field_path: None,
            },
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let (status, code) = match &e {
            Error::Domain(_) => (StatusCode::BAD_REQUEST, "domain_error"),
            Error::Ingest(_) => (StatusCode::UNPROCESSABLE_ENTITY, "ingest_error"),
            Error::Validation { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "validation_error"),
            Error::EmptyResult(_) => (StatusCode::UNPROCESSABLE_ENTITY, "empty_result"),
            Error::State(_) => (StatusCode::CONFLICT, "state_error"),
            Error::UnknownQuery(_) => (StatusCode::NOT_FOUND, "unknown_query"),
            Error::NotFinalized => (StatusCode::CONFLICT, "not_finalized"),
            Error::Finalized => (StatusCode::CONFLICT, "finalized"),
        };
        let mut err = ApiError::new(status, code, message);
        if let Error::Validation { field_path, .. } = e {
            err.body.field_path = Some(field_path);
        }
        err
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Core(e) => e.into(),
            StoreError::DatasetNotFound(_) => {
                let mut err = ApiError::new(StatusCode::NOT_FOUND, "dataset_not_found", e.to_string());
                err.body.field_path = Some("dataset_id".into());
                err
            }
            StoreError::SessionNotFound(_) => ApiError::new(StatusCode::NOT_FOUND, "session_not_found", e.to_string()),
            StoreError::Io(_) | StoreError::Corrupt { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
            }
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        let status = match r {
            JsonRejection::JsonDataError(_) => StatusCode::UNPROCESSABLE_ENTITY,
            JsonRejection::MissingJsonContentType(_) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, "bad_request", r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
