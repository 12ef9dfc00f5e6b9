//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by corpus construction, model training, and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("document {id}: timestamp {date} outside corpus span {start}..{end}")]
    OutOfSpan {
        id: String,
        date: chrono::NaiveDate,
        start: chrono::NaiveDate,
        end: chrono::NaiveDate,
    },

    #[error("source name {0:?} has no grouping entry")]
    UnmappedSource(String),

    #[error("vocabulary is empty after filtering")]
    EmptyVocabulary,

    #[error("model/corpus mismatch: {0}")]
    ModelMismatch(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("{algorithm} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        algorithm: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("corrupted file {path}: {reason}")]
    CorruptFile { path: String, reason: String },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the error is attributable to user input (files, config,
    /// out-of-range values) rather than an internal failure.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse(_)
                | Error::Config(_)
                | Error::OutOfSpan { .. }
                | Error::UnmappedSource(_)
                | Error::EmptyVocabulary
                | Error::ModelMismatch(_)
                | Error::CorruptFile { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
