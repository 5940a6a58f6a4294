use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the assignment pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate ensemble: {0}")]
    DegenerateEnsemble(String),

    #[error("query {query_id} has neither text nor features")]
    IncompleteInput { query_id: usize },

    #[error("instance too large for enumeration: {size:.3e} assignments exceeds cap {cap}")]
    InstanceTooLarge { size: f64, cap: u64 },

    #[error("{file}: {message}")]
    Validation { file: String, message: String },

    #[error("{file}: duplicate label for query {query_id}, llm {llm_id}")]
    DuplicateLabel {
        file: String,
        query_id: usize,
        llm_id: usize,
    },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document {}: {message}", .path.display())]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn validation(file: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            file: file.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InstanceTooLarge { .. } => 3,
            Error::NotFound(_) | Error::Io { .. } => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
