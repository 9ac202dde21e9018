use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A file does not follow the expected binary or text layout.
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    /// Two inputs that must agree do not.
    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// More coordinates than resource bins in one frame.
    #[error("subcarrier capacity exceeded: {required} bins required, {available} available")]
    Capacity { required: usize, available: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Overflow in the loss or its gradient.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("numeric failure in round {round}, device {device}: {reason}")]
    Numeric {
        round: u64,
        device: usize,
        reason: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Format { .. }
                | Error::Consistency(_)
                | Error::Argument(_)
                | Error::Capacity { .. }
                | Error::Config(_)
        )
    }
}
