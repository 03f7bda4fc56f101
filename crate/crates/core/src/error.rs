use std::path::PathBuf;

use thiserror::Error;

use crate::grid::{EdgeKey, NodeId, Violation};

pub type Result<T> = std::result::Result<T, GridError>;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("grid failed validation: {}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("edge {0} does not exist")]
    MissingEdge(EdgeKey),

    #[error("node {0} does not exist")]
    MissingNode(NodeId),

    #[error("dimension mismatch: expected {expected} entries, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("tolerance parameter alpha must be positive, got {0}")]
    InvalidAlpha(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("eigenvalue computation failed for a {0}x{0} matrix")]
    Eigensolver(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl GridError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GridError::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
