use std::path::PathBuf;

/// Errors produced by the completion library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    /// Parameter layout does not match the architecture that consumes it.
    #[error("structural error in `{entry}`: {reason}")]
    Structural { entry: String, reason: String },

    /// A non-finite value showed up in a loss, activation or gradient.
    #[error("non-finite value in `{entry}`")]
    Numerical { entry: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn structural(entry: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Structural { entry: entry.into(), reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Short stable identifier, used as the machine-readable prefix of CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Argument(_) => "argument",
            Error::Size(_) => "size",
            Error::UnsupportedSize(_) => "unsupported-size",
            Error::Structural { .. } => "structural",
            Error::Numerical { .. } => "numerical",
            Error::Parse { .. } => "parse",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
