//! Crate error type. Variants carry enough position information (file, row,
//! column, field) that a failing batch run can be diagnosed from the message
//! alone.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: header mismatch: expected {expected}, found {found}")]
    HeaderMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{path}: row {row}, column {col}: {msg}")]
    Cell {
        path: PathBuf,
        /// 1-based data row (header excluded).
        row: usize,
        col: String,
        msg: String,
    },

    #[error("{path}: line {line}: {msg}")]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("invalid argument {name}: {msg}")]
    InvalidArgument { name: &'static str, msg: String },

    #[error("class {class} has {count} samples, fewer than {folds} folds")]
    TooFewSamples {
        class: u8,
        count: usize,
        folds: usize,
    },

    #[error("training failed: {0}")]
    Training(String),

    #[error("model file {path}: {msg}")]
    Model { path: PathBuf, msg: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(name: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            msg: msg.into(),
        }
    }
}
