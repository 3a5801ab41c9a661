use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the modeling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid membership parameters: {0}")]
    InvalidMembership(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate firing row {row}: strength sum {sum:e} below guard")]
    DegenerateRow { row: usize, sum: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("non-finite premise gradient (learning rate {lr} too large?)")]
    NonFiniteGradient { lr: f64 },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error("{path}: line {line}, column '{column}': {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: String,
        message: String,
    },

    #[error("{path}: line {line}: missing value in column '{column}'")]
    MissingValue {
        path: PathBuf,
        line: usize,
        column: String,
    },

    #[error("unknown class label '{0}'")]
    UnknownLabel(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("cannot decode non-finite model output {0}")]
    Decode(f64),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("model file: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
