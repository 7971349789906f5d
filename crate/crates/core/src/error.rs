use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("{0}: empty input")]
    Empty(&'static str),

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("duplicate parameter name `{0}`")]
    DuplicateParam(String),

    #[error("token id {id} out of range for vocabulary of size {size}")]
    InvalidToken { id: u32, size: usize },

    #[error("caption is empty after cleaning: {0:?}")]
    EmptyCaption(String),

    #[error("bad magic in {what}: expected {expected:?}, found {found:?}")]
    BadMagic {
        what: &'static str,
        expected: [u8; 4],
        found: [u8; 4],
    },

    #[error("unsupported {what} version {version}")]
    Version { what: &'static str, version: u32 },

    #[error("truncated {what}: expected {expected} bytes, found {found}")]
    Truncated {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at index {index} in {what}")]
    NonFinite { what: &'static str, index: usize },

    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },

    #[error("checkpoint parameter mismatch: {0}")]
    ParamMismatch(String),

    #[error("metric input error: {0}")]
    Metric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing path {}", .0.display())]
    MissingPath(PathBuf),

    #[error("non-finite loss in {stage} stage at epoch {epoch}")]
    Divergence { stage: String, epoch: usize },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    /// Whether the error originates from a damaged or foreign artifact file
    /// rather than from bad user input.
    pub fn is_corrupt_artifact(&self) -> bool {
        matches!(
            self,
            Error::BadMagic { .. }
                | Error::Version { .. }
                | Error::Truncated { .. }
                | Error::NonFinite { .. }
                | Error::Malformed { .. }
                | Error::ParamMismatch(_)
        )
    }
}
