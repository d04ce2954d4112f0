use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch: expected {expected}, got {got}")]
    InputShape { expected: usize, got: usize },

    #[error("empty data: {0}")]
    EmptyData(&'static str),

    #[error("insufficient data: need {needed}, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("damped normal matrix is singular at lambda = {lambda:e}")]
    DampingSingular { lambda: f64 },

    #[error("stage-1 ensemble failed: only {solved} of {requested} systems converged after {attempts} attempts")]
    Stage1Failure {
        solved: usize,
        requested: usize,
        attempts: usize,
    },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("column not found: {0}")]
    ColumnNotFound(String),

    #[error("normalizer is zero or negative ({0:e})")]
    ZeroNormalizer(f64),

    #[error("mask length {got} does not match parameter count {expected}")]
    MaskShape { expected: usize, got: usize },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: String },

    #[error("series {series}: {source}")]
    Ingest {
        series: String,
        #[source]
        source: Box<Error>,
    },

    #[error("corrupted model field `{field}`: {message}")]
    CorruptedField { field: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
