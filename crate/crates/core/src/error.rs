use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
///
/// The variants map onto the process exit codes used by the command line:
/// configuration problems, data problems and contract violations are kept
/// distinct so callers can react to each.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("decode error in `{field}`: {message}")]
    Decode { field: String, message: String },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("enumeration refused: {subsets} subsets exceeds the limit of {limit}")]
    TooManySubsets { subsets: u128, limit: u128 },

    #[error("replay buffer holds {len} transitions, {requested} requested")]
    Underfull { len: usize, requested: usize },

    #[error("i/o error on {path}", path = path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn decode(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Decode {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Broad category used to pick a process exit code.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parameter(_) | Error::Config(_) | Error::TooManySubsets { .. } => {
                ErrorKind::Config
            }
            Error::Generation(_)
            | Error::Decode { .. }
            | Error::Parse { .. }
            | Error::Underfull { .. }
            | Error::Io { .. } => ErrorKind::Data,
            Error::Contract(_) => ErrorKind::Contract,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Contract,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
