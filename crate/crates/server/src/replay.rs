//! Offline replay of recorded captures.

use std::path::Path;

use thiserror::Error;
use uaengine::engine::capture::{replay, Capture, CaptureError, ReplayReport};

use crate::config::{ConfigError, ServerConfig};
use crate::live::build_engine;

/// Config file written next to a recording.
pub const CAPTURE_CONFIG: &str = "server.conf";

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Capture(#[from] CaptureError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// The configuration a capture was recorded with, or the defaults.
pub fn capture_config(dir: &Path) -> Result<ServerConfig, ConfigError> {
    let path = dir.join(CAPTURE_CONFIG);
    if path.exists() {
        ServerConfig::load(&path)
    } else {
        Ok(ServerConfig::default())
    }
}

/// Replays a capture directory against a fresh engine.
pub fn replay_dir(dir: &Path) -> Result<ReplayReport, ReplayError> {
    let capture = Capture::load(dir)?;
    let cfg = capture_config(dir)?;
    let mut engine = build_engine(&cfg)?;
    Ok(replay(&capture, &mut engine))
}
