use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was handed fewer samples than it needs.
    #[error("{op} needs at least {needed} samples, got {got}")]
    Length {
        op: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Local moments were requested from weights that carry no evidence.
    #[error("total weight {total_weight:e} below minimum {minimum:e}")]
    LowConfidence { total_weight: f64, minimum: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("{}:{line}: {message}", path.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "<input>".into()))]
    Parse {
        path: Option<PathBuf>,
        line: usize,
        message: String,
    },

    #[error("environment fault: {0}")]
    Env(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: None,
            line,
            message: message.into(),
        }
    }

    /// Attach a file path to a parse error.
    pub fn with_path(self, path: impl Into<PathBuf>) -> Self {
        match self {
            Error::Parse { line, message, .. } => Error::Parse {
                path: Some(path.into()),
                line,
                message,
            },
            other => other,
        }
    }
}
