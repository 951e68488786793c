use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported audio format: {0}")]
    Format(String),

    #[error("corrupt audio file: {0}")]
    Corrupt(String),

    #[error("unsupported rate conversion {from} Hz -> {to} Hz (integer ratios only)")]
    UnsupportedRate { from: u32, to: u32 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("value outside domain: {0}")]
    OutOfDomain(String),

    #[error("malformed table: {0}")]
    Table(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        match err.into_kind() {
            csv::ErrorKind::Io(e) => Error::Io(e),
            other => Error::Table(format!("{other:?}")),
        }
    }
}
