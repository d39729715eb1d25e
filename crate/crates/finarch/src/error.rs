//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("dataset {path}: item {item}: missing or invalid field `{field}`")]
    DatasetField {
        path: PathBuf,
        item: usize,
        field: String,
    },

    #[error("dataset {path}: {msg}")]
    Dataset { path: PathBuf, msg: String },

    #[error("duplicate dialog id `{0}`")]
    DuplicateDialog(String),

    #[error("unknown dialog id `{0}`")]
    UnknownDialog(String),

    #[error("ragged table row {row}: expected {expected} cells, got {got}")]
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("empty entity label in table row {row}")]
    EmptyEntity { row: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("cannot embed empty text")]
    EmptyText,

    /// Transient transport failure; callers may retry.
    #[error("endpoint unreachable at {endpoint}: {msg}")]
    EndpointUnreachable { endpoint: String, msg: String },

    /// The endpoint answered, but not with the expected payload.
    #[error("malformed response from {endpoint}: {msg}")]
    MalformedResponse { endpoint: String, msg: String },

    #[error("strict replay miss: no transcript entry for key {key}")]
    TranscriptMiss { key: String },

    #[error("transcript collision: key {key} already holds a different response")]
    TranscriptCollision { key: String },

    #[error("prompt for {arch} is missing its required `{section}` section")]
    MissingPromptSection { arch: String, section: String },

    #[error("log {path}: {msg}")]
    LogFormat { path: PathBuf, msg: String },

    #[error("artifact hash mismatch: {msg}")]
    HashMismatch { msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing input: {0}")]
    MissingInput(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for transport-level failures that a caller may retry.
    pub fn is_retriable(&self) -> bool {
        matches!(self, Error::EndpointUnreachable { .. })
    }

    /// Process exit code contract: 0 success, 1 usage, 2 data, 3 endpoint.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EndpointUnreachable { .. } | Error::MalformedResponse { .. } => 3,
            Error::InvalidArgument(_) => 1,
            _ => 2,
        }
    }
}
