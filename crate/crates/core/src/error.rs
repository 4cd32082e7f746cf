use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or inconsistent input data.
    Validation,
    /// Input is well formed but an algorithm cannot run on it.
    Precondition,
    /// Filesystem or stream failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("series has no observed values{}", index.map(|i| format!(" (series #{i})")).unwrap_or_default())]
    EmptySeries { index: Option<usize> },

    #[error("cannot form {k} clusters from {n} series")]
    TooFewSeries { k: usize, n: usize },

    #[error("need at least {needed} profiles, got {got}")]
    TooFewProfiles { needed: usize, got: usize },

    #[error("dataset contains no primary roads")]
    NoPrimaryRoads,

    #[error("street {0} has no speed values")]
    NoData(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("bucket {bucket} out of range 0..{buckets} (street {street_id}, line {line})")]
    InvalidBucket {
        street_id: String,
        bucket: i64,
        buckets: usize,
        line: u64,
    },

    #[error("duplicate attribute row for street {0}")]
    DuplicateAttributeKey(String),

    #[error("duplicate street id {0}")]
    DuplicateStreet(String),

    #[error("invalid bucket grid: {0}")]
    InvalidGrid(String),

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("invalid archetype spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::EmptySeries { .. }
            | Error::TooFewSeries { .. }
            | Error::TooFewProfiles { .. }
            | Error::NoPrimaryRoads
            | Error::NoData(_) => ErrorClass::Precondition,
            Error::Io { .. } => ErrorClass::Io,
            Error::Csv(e) if e.is_io_error() => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
