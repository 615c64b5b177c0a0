use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed configuration or scenario text.
    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },

    /// A value violates a physical or structural invariant. `key` names the
    /// offending configuration key (or field) so the user can find it.
    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },

    /// A function was evaluated outside its mathematical domain.
    #[error("domain error in {what}: {message}")]
    Domain { what: &'static str, message: String },

    /// Integration aborted (blow-up, invariant violation, step underflow).
    #[error("integration failed at t = {t} s: {message}")]
    Integration { t: f64, message: String },

    #[error("{message}")]
    Convergence { message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn domain(what: &'static str, message: impl Into<String>) -> Self {
        Error::Domain {
            what,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
