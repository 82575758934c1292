use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file. `line` is 1-based; 0 means "no specific line".
    #[error("{origin}:{line}: {message}")]
    Format {
        origin: String,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("unresolved identifier `{0}`")]
    Unresolved(String),

    #[error("inconsistent pair {reference}/{probe}: {message}")]
    Referential {
        reference: String,
        probe: String,
        message: String,
    },

    #[error("degenerate embedding `{0}`: zero norm")]
    DegenerateEmbedding(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("unsupported model file: {0}")]
    ModelVersion(String),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("image: {0}")]
    Image(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty score list: {0}")]
    EmptyScores(&'static str),

    #[error("extractor exited with {status}: {stderr}")]
    Extraction { status: String, stderr: String },

    #[error("extractor timed out after {0:?}")]
    Timeout(std::time::Duration),
}

impl Error {
    pub(crate) fn format(origin: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            origin: origin.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse classification used by front ends to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::Format { .. }
            | Error::Dimension { .. }
            | Error::Unresolved(_)
            | Error::Referential { .. }
            | Error::ModelVersion(_)
            | Error::Image(_)
            | Error::Extraction { .. }
            | Error::Timeout(_) => ErrorKind::Data,
            Error::InvalidParameter(_) => ErrorKind::Usage,
            Error::DegenerateEmbedding(_)
            | Error::Training(_)
            | Error::Calibration(_)
            | Error::Geometry(_)
            | Error::EmptyScores(_) => ErrorKind::Numeric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}
