use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad or missing configuration values (weights, thresholds, paths).
    #[error("configuration error: {0}")]
    Config(String),

    /// Generator spec cannot produce a log.
    #[error("generator spec error: {0}")]
    Spec(String),

    /// A record in an input file could not be parsed.
    #[error("{}:{line}: byte {offset}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        offset: usize,
        message: String,
    },

    /// Well-formed data that breaks a domain invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Caller passed an argument outside an operation's domain.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Validation,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Spec(_) => ErrorKind::Config,
            Error::Parse { .. } | Error::Validation(_) | Error::Input(_) => ErrorKind::Validation,
            Error::Io { .. } => ErrorKind::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        path: impl Into<PathBuf>,
        line: usize,
        offset: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            offset,
            message: message.into(),
        }
    }
}
