use std::path::PathBuf;

use thiserror::Error;

use crate::ids::{QueryId, SegmentId, StarId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("network integrity: {0}")]
    Integrity(String),

    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("point ({lon}, {lat}) is outside the indexed coverage area")]
    OutOfCoverage { lon: f64, lat: f64 },

    #[error("unknown star {0:?}")]
    UnknownStar(StarId),

    #[error("unknown segment {0:?}")]
    UnknownSegment(SegmentId),

    #[error("unknown query {0:?}")]
    UnknownQuery(QueryId),

    #[error("duplicate query for user {user} at time {time}")]
    DuplicateQuery { user: u64, time: f64 },

    #[error("segment {0:?} has no intersection terminal and cannot be anonymized")]
    Unanonymizable(SegmentId),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("bundle error: {0}")]
    Bundle(String),

    #[error("report error: {0}")]
    Report(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user configuration rather than bad data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Report(_))
    }
}
