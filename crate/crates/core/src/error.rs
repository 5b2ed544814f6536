use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("field `{field}` out of range: {reason}")]
    OutOfRange { field: &'static str, reason: String },

    #[error("linear solve failed ({context}): residual {residual:.3e}")]
    SolveFailed { context: String, residual: f64 },

    #[error("assembly failed at mode {mode}: {source}")]
    AssemblyFailed {
        mode: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("mismatched operators: {0}")]
    Mismatch(String),

    #[error("numerical check failed: {0}")]
    CheckFailed(String),

    #[error("archive error: {0}")]
    Archive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
