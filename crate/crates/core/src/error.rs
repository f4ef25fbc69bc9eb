use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("skeleton mismatch: expected {expected} joints, found {found}")]
    SkeletonMismatch { expected: usize, found: usize },

    #[error("no keypoints present")]
    NoKeypoints,

    #[error("probability {name} = {value} is outside [0, 1]")]
    Probability { name: &'static str, value: f64 },

    #[error("binary label must be 0 or 1, got {0}")]
    Label(i64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("frame {got} does not follow frame {previous}")]
    FrameOrder { previous: u64, got: u64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
