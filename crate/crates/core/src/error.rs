use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or input violated a documented precondition.
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("not a field file (bad magic {found:?})")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported field file version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("truncated payload: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("element {index} (line {line}): {source}")]
    Element {
        index: usize,
        line: usize,
        #[source]
        source: Box<Error>,
    },

    /// More than the allowed fraction of power sits in the outermost samples,
    /// so periodic wrap-around is contaminating the result.
    #[error("guard band holds {fraction:.3e} of total power (limit {limit:.1e})")]
    GuardBand { fraction: f64, limit: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation { .. } | Error::Parse { .. } => true,
            Error::Element { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
