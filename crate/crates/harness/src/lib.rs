//! Experiment configuration, sweeps over channel draws, result files and
//! the acceptance checks behind the `relaycast` command.

pub mod acceptance;
pub mod config;
pub mod runner;
pub mod sweep;

use relaycast_core::CoreError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}
