use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

use crate::correlation::CorrelationError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Parse(String),

    #[error("duplicate GSR date {0}")]
    DuplicateGsrDate(NaiveDate),

    #[error("negative GSR count {count} on {date}")]
    NegativeCount { date: NaiveDate, count: i64 },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("feature {0} is not present in the count matrix")]
    UnknownFeature(String),

    #[error("no features were extracted from the corpus")]
    NoFeatures,

    #[error(transparent)]
    Correlation(#[from] CorrelationError),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// The stage label, if the error was raised by a pipeline stage.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
