//! Crate-wide error type.

/// Errors produced by any part of the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value violated a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration was internally inconsistent or unusable.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An operation was attempted on an object in an unusable state.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A text artifact (dataset, snapshot, manifest, config) failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Training produced a non-finite loss or gradient.
    #[error("training diverged in cycle {cycle}: {msg}")]
    TrainingDiverged { cycle: usize, msg: String },

    /// The ensemble could not be filled within the training-cycle budget.
    #[error("cannot fill ensemble: {0}")]
    CannotFillEnsemble(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
