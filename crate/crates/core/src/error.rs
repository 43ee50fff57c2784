use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the synesthete library.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor, vector or layer dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A value lies outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// A precondition on model or pipeline state was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid training or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed Standard MIDI File.
    #[error("MIDI parse error at byte {offset}: {message}")]
    Midi { offset: usize, message: String },

    /// Malformed or unsupported PNG.
    #[error("PNG error: {0}")]
    Png(String),

    /// Checkpoint container could not be decoded.
    #[error("checkpoint parse error: {0}")]
    CheckpointParse(String),

    /// Checkpoint decoded but does not match what the caller requires.
    #[error("checkpoint mismatch in field `{field}`: {message}")]
    CheckpointMismatch { field: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn midi(offset: usize, msg: impl Into<String>) -> Self {
        Error::Midi {
            offset,
            message: msg.into(),
        }
    }

    pub(crate) fn mismatch(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::CheckpointMismatch {
            field: field.into(),
            message: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
