use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes do not conform to what an operation requires.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A non-finite value was fed into (or would be produced by) a kernel.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An API was driven in an invalid order (e.g. backward without forward).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported WFDB storage format {0} (only format 16 is supported)")]
    UnsupportedFormat(u16),

    #[error("truncated signal data: expected {expected} bytes, found {actual}")]
    Truncation { expected: usize, actual: usize },

    #[error("invalid sample (sentinel -32768) at frame {frame}, signal {signal}")]
    InvalidSample { frame: usize, signal: usize },

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("input error: {0}")]
    Input(String),

    /// A metric is mathematically undefined for the given labels.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Failure while loading one record's signal.
    #[error("record {ecg_id}: {source}")]
    Record {
        ecg_id: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Innermost error, looking through [`Error::Record`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Record { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
