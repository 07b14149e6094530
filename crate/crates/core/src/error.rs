use std::path::PathBuf;

use thiserror::Error;

/// Broad failure class, used by the command-line tool to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Ingestion,
    Convergence,
    Contract,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Ingestion => 3,
            ErrorKind::Convergence => 4,
            ErrorKind::Contract => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("ingest: cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("ingest: {path}: row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("ingest: {0}")]
    Ingest(String),

    #[error("scorer: no convergence after {iterations} iterations (deviance {deviance})")]
    NoConvergence { iterations: usize, deviance: f64 },

    #[error("scorer: {0}")]
    Scores(String),

    #[error("{context}: singular matrix")]
    Singular { context: &'static str },

    #[error("{context}: {message}")]
    Degenerate {
        context: &'static str,
        message: String,
    },

    #[error("dataset fingerprint mismatch: expected {expected}, found {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("contract: {0}")]
    Contract(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Io { .. } | Error::RaggedRow { .. } | Error::Ingest(_) | Error::Scores(_) => {
                ErrorKind::Ingestion
            }
            Error::NoConvergence { .. } => ErrorKind::Convergence,
            Error::Singular { .. }
            | Error::Degenerate { .. }
            | Error::FingerprintMismatch { .. }
            | Error::Contract(_) => ErrorKind::Contract,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
