//! Error type shared by parsing, model construction, and the engine.

use thiserror::Error;

/// Everything that can go wrong between reading an input document and
/// emitting a result. The CLI maps variants onto process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Syntax or range error in an input document, with a 1-based line number.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// Semantically invalid data handed to a constructor or command.
    #[error("{0}")]
    Invalid(String),
    /// An internal invariant of the engine was violated; indicates a bug
    /// or corrupted state, never a user mistake.
    #[error("internal invariant violation: {0}")]
    Internal(String),
    /// Engine output and oracle output disagree.
    #[error("verification mismatch: {0}")]
    Mismatch(String),
}

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
