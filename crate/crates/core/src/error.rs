use thiserror::Error;

/// Errors raised anywhere in the inference engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical degeneracy in {context}: factorization failed with ridge {ridge:e}")]
    NumericalDegeneracy { context: String, ridge: f64 },

    #[error("insufficient samples: need at least {need}, got {got}")]
    InsufficientSamples { need: usize, got: usize },

    #[error("simulator domain error: {0}")]
    SimulatorDomain(String),

    #[error("simulation failure: {0}")]
    SimulationFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors that come from a simulator call and should be
    /// absorbed by the sampler as a rejected proposal.
    pub fn is_simulation_error(&self) -> bool {
        matches!(self, Error::SimulatorDomain(_) | Error::SimulationFailure(_))
    }
}
