//! Error type shared by every module of the toolkit.

use std::fmt;

/// Toolkit-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Shape mismatch between tensors or layers; carries both shapes.
    Dimension {
        context: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    /// An argument value outside its documented domain.
    Argument(String),
    /// A missing or inconsistent piece of configuration (e.g. a layer
    /// without a pattern when one is required).
    Config(String),
    /// A non-finite value surfaced where a finite one is required.
    Numeric(String),
    /// Malformed text input; `line` is 1-based.
    Parse { line: usize, message: String },
    /// Training diverged at the given epoch.
    Training { epoch: usize, message: String },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension {
                context,
                expected,
                found,
            } => write!(
                f,
                "dimension mismatch in {context}: expected {expected:?}, found {found:?}"
            ),
            Error::Argument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::Training { epoch, message } => {
                write!(f, "training failed at epoch {epoch}: {message}")
            }
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}
