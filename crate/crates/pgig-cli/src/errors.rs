//! CLI error type with the exit-code contract:
//! 0 success, 2 config/parse errors, 3 precondition errors, 4 numeric
//! errors.

use pgig_core::Error as CoreError;
use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or malformed config/manifest text; exit code 2.
    Usage(String),
    /// Missing files, missing patterns, shape problems; exit code 3.
    Precondition(String),
    /// Non-finite values or diverged training; exit code 4.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn usage(msg: impl Into<String>) -> CliError {
        CliError::Usage(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> CliError {
        CliError::Precondition(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Precondition(msg) => write!(f, "{msg}"),
            CliError::Numeric(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::Parse { line, message } => {
                CliError::Usage(format!("parse error at line {line}: {message}"))
            }
            CoreError::Numeric(msg) => CliError::Numeric(format!("numeric error: {msg}")),
            CoreError::Training { epoch, message } => {
                CliError::Numeric(format!("training failed at epoch {epoch}: {message}"))
            }
            other => CliError::Precondition(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Precondition(format!("i/o error: {err}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
