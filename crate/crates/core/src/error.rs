use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("trial {index}: file {path} not found")]
    MissingTrialFile { index: usize, path: PathBuf },

    #[error("trial {index}: {detail}")]
    DimensionMismatch { index: usize, detail: String },

    #[error("trial {index}: non-finite sample at channel {channel}, sample {sample}")]
    NonFiniteSample {
        index: usize,
        channel: usize,
        sample: usize,
    },

    #[error("trial {index}: label {label} outside 0..{n_classes}")]
    InvalidLabel {
        index: usize,
        label: i64,
        n_classes: usize,
    },

    #[error("invalid band edges: lo={lo} hi={hi} fs={fs}")]
    InvalidBand { lo: f64, hi: f64, fs: f64 },

    #[error("window [{start}, {end}) exceeds recording of {len} samples")]
    WindowOutOfBounds { start: i64, end: i64, len: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("unknown {what}: {value}")]
    Unknown { what: &'static str, value: String },

    #[error("missing activation cache")]
    MissingCache,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad data rather than bad configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Json { .. }
                | Error::MissingTrialFile { .. }
                | Error::DimensionMismatch { .. }
                | Error::NonFiniteSample { .. }
                | Error::InvalidLabel { .. }
                | Error::WindowOutOfBounds { .. }
                | Error::Empty(_)
                | Error::Csv(_)
        )
    }
}
