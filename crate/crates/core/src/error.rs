use thiserror::Error;

/// Errors raised by the federation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FedError {
    /// Two vectors (or a vector and a model shape) disagree on length.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("aggregation failed: {0}")]
    Aggregation(String),

    #[error("invalid data: {0}")]
    Data(String),

    /// A local solve produced a non-finite iterate.
    #[error("non-finite model after local step {step}")]
    NonFinite { step: usize },

    /// A numerical failure located within a federation run.
    #[error("numerical failure in round {round}, party {party}, local step {step}")]
    Numerical {
        round: usize,
        party: usize,
        step: usize,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl FedError {
    pub fn config(msg: impl Into<String>) -> Self {
        FedError::Config(msg.into())
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            FedError::NonFinite { .. } | FedError::Numerical { .. }
        )
    }
}

impl From<std::io::Error> for FedError {
    fn from(err: std::io::Error) -> Self {
        FedError::Io(err.to_string())
    }
}

impl From<csv::Error> for FedError {
    fn from(err: csv::Error) -> Self {
        FedError::Io(err.to_string())
    }
}

impl From<serde_json::Error> for FedError {
    fn from(err: serde_json::Error) -> Self {
        FedError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FedError>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(FedError::Dimension { expected, found })
    }
}
