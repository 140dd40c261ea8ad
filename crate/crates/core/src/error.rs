use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {message}", file.display())]
    Parse { file: PathBuf, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("out of bounds: {0}")]
    Bounds(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("feature {feature} on sensor {sensor} is not finite")]
    Extraction { feature: String, sensor: usize },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps the error with a description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// The innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerical machinery rather than of the data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::Training(_) | Error::Divergence { .. } | Error::Extraction { .. }
        )
    }
}
