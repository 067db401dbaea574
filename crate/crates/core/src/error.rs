use thiserror::Error;

use crate::query::IngestError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Ingest(#[from] IngestError),

    /// A user-supplied spec failed validation. `field_path` locates the
    /// offending field, e.g. `queries[2].group_by`.
    #[error("invalid {field_path}: {message}")]
    Validation { field_path: String, message: String },

    #[error("query `{0}` produced no subgroups")]
    EmptyResult(String),

    /// The requested transition is not allowed from the current state.
    #[error("state error: {0}")]
    State(String),

    #[error("unknown query `{0}`")]
    UnknownQuery(String),

    #[error("session has not been finalized")]
    NotFinalized,

    #[error("session is finalized; budget can no longer change")]
    Finalized,
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(field_path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field_path: field_path.into(),
            message: message.into(),
        }
    }

    /// Prefix the field path of a validation error, leaving other errors alone.
    pub fn within(self, prefix: &str) -> Self {
        match self {
            Error::Validation {
                field_path,
                message,
            } => Error::Validation {
                field_path: format!("{prefix}.{field_path}"),
                message,
            },
            other => other,
        }
    }
}
