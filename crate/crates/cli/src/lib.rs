//! Experiment runner behind the `fedplus` binary.

pub mod config;
pub mod runner;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("run `{run}`: numerical failure at round {round}, party {party}, local step {step}")]
    Numerical {
        run: String,
        round: usize,
        party: usize,
        step: usize,
    },
    #[error("run `{run}`: {message}")]
    Run { run: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Run { .. } | CliError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
