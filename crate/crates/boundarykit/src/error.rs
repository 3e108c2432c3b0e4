use std::io;
use std::path::PathBuf;

/// Errors surfaced by file IO, configuration and the command line.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad arguments or configuration; nothing was read or written.
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// A file does not follow its documented format.
    #[error("{path}: malformed file at byte {offset}: {message}")]
    Format { path: PathBuf, offset: u64, message: String },

    /// Input data that is well formed but unusable (mismatched shapes,
    /// missing pairs, empty evaluations).
    #[error("{0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] boundarykit_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, offset: u64, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), offset, message: message.into() }
    }

    /// Process exit status: 1 for validation problems, 2 for data and
    /// format problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Validation(_) | Error::Core(boundarykit_core::Error::Config(_)) => 1,
            _ => 2,
        }
    }
}
