//! Live `opc.tcp` front end for the engine, with capture recording and
//! replay.

mod config;
mod live;
pub mod logging;
mod replay;

pub use config::{ConfigError, ServerConfig};
pub use live::{build_engine, Server, ServerError};
pub use replay::{capture_config, replay_dir, ReplayError, CAPTURE_CONFIG};
