use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid version pattern `{pattern}`: {reason}")]
    InvalidPattern { pattern: String, reason: String },

    #[error("`{0}` is not a major.minor.maintenance version")]
    InvalidVersion(String),

    #[error("invalid column layout: {0}")]
    InvalidLayout(String),

    #[error("cannot read snapshot {path}: {source}")]
    SnapshotIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("snapshot {path} has no data rows")]
    EmptySnapshot { path: PathBuf },

    #[error("snapshot {path}: column `{column}` not found in header row")]
    MissingColumn { path: PathBuf, column: String },

    #[error("invalid manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },

    #[error("need at least {needed} usable snapshots, found {found}")]
    TooFewSnapshots { needed: usize, found: usize },

    #[error("sequence of length {0} is too short; at least 2 observations are required")]
    SequenceTooShort(usize),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by bad input or unmet preconditions rather than
    /// failures while running.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidPattern { .. }
                | Error::InvalidLayout(_)
                | Error::Manifest { .. }
                | Error::TooFewSnapshots { .. }
                | Error::MissingColumn { .. }
        )
    }
}
