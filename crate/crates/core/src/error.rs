use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("trace contains no valid records ({skipped} malformed records skipped)")]
    EmptyTrace { skipped: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("ranking has a duplicate entry at position {0}")]
    DuplicateEntry(usize),

    #[error("empty set: {0}")]
    EmptySet(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse classification used to pick a process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Internal,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Tags an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Stage { source, .. } => source.class(),
            Error::Config(_) => ErrorClass::Config,
            Error::Io { .. }
            | Error::Stream(_)
            | Error::EmptyTrace { .. }
            | Error::Unknown { .. }
            | Error::EmptySet(_)
            | Error::Snapshot(_)
            | Error::Training(_) => ErrorClass::Data,
            Error::Distribution(_) | Error::DuplicateEntry(_) => ErrorClass::Internal,
        }
    }
}
