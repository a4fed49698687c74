//! Batch front end: configs in, CSV/JSON reports out.

pub mod commands;
pub mod config;

use thiserror::Error;

pub use commands::{Command, RunOptions};
pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] lrkit_core::Error),
    #[error("{0} sites exceed the cap of {cap}; pass --allow-large to override", cap = lrkit_core::SITE_CAP)]
    ResourceCap(usize),
    #[error("invariant check failed: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invariant(_) | CliError::Core(lrkit_core::Error::Internal(_)) => 1,
            CliError::Config(_) | CliError::Core(_) | CliError::Io(_) => 2,
            CliError::ResourceCap(_) => 3,
        }
    }
}
