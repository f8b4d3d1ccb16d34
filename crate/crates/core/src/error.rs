//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the library.
///
/// The variants follow the failure categories the CLI maps to exit
/// codes: parse errors name the offending line of an input file,
/// validation errors report violated preconditions between otherwise
/// well-formed inputs, and numerical errors report computations that
/// could not be completed reliably.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
