use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("continuation fit failed at exercise date {date}: {source}")]
    Fit {
        date: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        Error::Shape { expected: expected.to_string(), found: found.to_string() }
    }

    /// True when the error originates from a diverging optimizer, possibly
    /// wrapped in a per-date fit failure.
    pub fn is_numeric_failure(&self) -> bool {
        match self {
            Error::NonFiniteLoss { .. } => true,
            Error::Fit { source, .. } => source.is_numeric_failure(),
            _ => false,
        }
    }
}
