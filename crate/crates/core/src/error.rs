use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("domain mismatch: {0}")]
    Domain(String),

    #[error("model validation failed: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("energy diverged at site {site} (sweep {sweep}): {detail}")]
    Divergent {
        site: usize,
        sweep: usize,
        detail: String,
    },

    #[error("system too large for quadrature: {0}")]
    TooLarge(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("manifest error in `{field}`: {message}")]
    Manifest { field: String, message: String },

    #[error("{context}: {source}")]
    Study {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Wraps the error with the study stage it came from.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Study {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
