use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A dense decomposition failed to converge.
    #[error("decomposition failed: {0}")]
    Decomposition(String),

    /// An input lies outside the domain where a formula is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller violated an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    /// A matrix file could not be parsed.
    #[error("{path}:{line}: {msg}")]
    Ingest {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Configuration text could not be interpreted.
    #[error("config error: {0}")]
    Config(String),

    /// The stochastic integrator could not make progress.
    #[error("integrator failure at t = {time}: {msg}")]
    Integrator { time: f64, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
