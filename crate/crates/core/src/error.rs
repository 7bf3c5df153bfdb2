use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("input out of domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A rate or bit target cannot be met, e.g. every gain in the span is zero.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("playout buffer ({fmax} bits) must exceed the largest frame ({max_frame} bits)")]
    BufferTooSmall { fmax: f64, max_frame: f64 },

    #[error("no progress: {0}")]
    Progress(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("trace {path}: {kind}")]
    Trace { path: PathBuf, kind: TraceError },

    #[error("{context}: {source}")]
    Run {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Parse failures for frame-size trace files.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("file contains no frames")]
    Empty,
    #[error("line {line}: malformed row: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("line {line}: frame size must be positive, got {value}")]
    NonPositiveSize { line: u64, value: f64 },
    #[error("line {line}: expected frame index {expected}, got {found}")]
    OutOfOrder { line: u64, expected: u64, found: u64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn context(self, context: impl Into<String>) -> Self {
        Error::Run {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
