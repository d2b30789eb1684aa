use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    Shape {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("solver diverged at iteration {iteration}: residual is not finite")]
    Diverged { iteration: usize },

    #[error("particle filter degenerate: every particle has zero weight")]
    Degenerate,

    #[error("invalid particle: patch footprint lies entirely outside the image")]
    InvalidParticle,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("frame {frame}: {source}")]
    Frame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {msg}")]
    Input { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than by bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Numeric(_) | Error::Diverged { .. } | Error::Degenerate => true,
            Error::Frame { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    pub(crate) fn input(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Input {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
