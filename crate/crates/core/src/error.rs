use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("covariate `{0}` is constant")]
    ConstantCovariate(&'static str),

    #[error("no eligible users: {0}")]
    NoEligibleUsers(String),

    #[error("no attractors available")]
    NoAttractors,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    /// True for errors caused by the input data rather than by configuration.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidParameter { .. })
    }
}
