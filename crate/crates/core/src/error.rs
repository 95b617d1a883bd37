use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: dangling references, missing entries, bad shapes.
    #[error("structural error: {0}")]
    Structural(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// A consistency check that should hold by construction failed.
    #[error("internal consistency error: {0}")]
    Internal(String),
    #[error("degenerate geometry: {0}")]
    Geometry(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by the caller's input rather than by the domain.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Structural(_) | Error::Parse(_) | Error::Io(_) | Error::Argument(_))
    }
}
