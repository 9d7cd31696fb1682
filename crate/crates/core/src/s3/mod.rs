//! S3 stages: one per session, each with a bounded message buffer, the
//! session state machine and dispatch of Read/Write to the stream processor.

mod config;
mod services;
mod stage;

use thiserror::Error;

pub use config::{EngineConfig, DEFAULT_TOTAL_BUFFER_BYTES, MAX_SESSION_TIMEOUT_MS};
pub use services::{ServiceContext, ServiceOutcome, ServicePrograms, ServiceWork};
pub use stage::{S3Stage, StagePool, StageState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("at least one stage is required")]
    NoStages,
    #[error("stage buffer of {0} bytes is below the 8192-byte transport minimum")]
    BufferTooSmall(usize),
    #[error("stages need {need} buffer bytes but only {total} are configured")]
    BufferBudget { need: usize, total: usize },
    #[error("{0}")]
    Invalid(&'static str),
}
