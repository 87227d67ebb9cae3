use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("header line {line}: {message}")]
    HeaderParse { line: usize, message: String },

    #[error("header line {line}: unsupported storage format {format} (only format 16 is supported)")]
    UnsupportedFormat { line: usize, format: String },

    #[error("signal length mismatch: expected {expected} bytes, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("cannot parse record identity from name {0:?}")]
    Identity(String),

    #[error("value {value} at sample {sample}, channel {channel} overflows 16 bits at gain {gain}")]
    Overflow {
        channel: usize,
        sample: usize,
        value: f64,
        gain: f64,
    },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("signal has {samples} samples, shorter than one window of {window}")]
    SignalTooShort { samples: usize, window: usize },

    #[error("need at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("covariance is singular after shrinkage {shrinkage}; use shrinkage > 0 or more varied enrollment data")]
    SingularCovariance { shrinkage: f64 },

    #[error("duplicate record key {0}")]
    DuplicateRecord(String),

    #[error("missing data: {0}")]
    Missing(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("template store config hash {found} does not match expected {expected}")]
    ConfigHashMismatch { expected: String, found: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
