use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rejected input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("malformed manifest {path}: {reason}")]
    MalformedManifest { path: PathBuf, reason: String },

    #[error("manifest entry for class {class_label}: signal file {path} not found")]
    MissingSignalFile { class_label: usize, path: PathBuf },

    #[error("manifest entry for class {class_label}: signal file {path} holds {len} samples, need at least {min}")]
    SignalTooShort {
        class_label: usize,
        path: PathBuf,
        len: usize,
        min: usize,
    },

    #[error("manifest entry for class {class_label}: {reason}")]
    BadSignalFile {
        class_label: usize,
        path: PathBuf,
        reason: String,
    },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn shape_err(
    context: &'static str,
    expected: impl ToString,
    actual: impl ToString,
) -> Error {
    Error::ShapeMismatch {
        context,
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}
