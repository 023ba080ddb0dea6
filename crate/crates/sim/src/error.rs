use std::io;

use misobc_core::Error as CoreError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config error: {0}")]
    Config(String),

    #[error("malformed channel file, line {line}: {reason}")]
    ChannelFormat { line: usize, reason: String },

    #[error(transparent)]
    Solver(#[from] CoreError),

    #[error("{0} did not converge")]
    NotConverged(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SimError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Solver(CoreError::Infeasible { .. } | CoreError::ZeroCapacity { .. }) => 2,
            SimError::NotConverged(_) | SimError::Solver(CoreError::Bracket(_)) => 3,
            SimError::Config(_) | SimError::ChannelFormat { .. } | SimError::Solver(_) => 4,
            SimError::Io(_) | SimError::Csv(_) => 1,
        }
    }
}

impl From<toml::de::Error> for SimError {
    fn from(e: toml::de::Error) -> Self {
        SimError::Config(e.to_string())
    }
}
