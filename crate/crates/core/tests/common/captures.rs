//! Golden captures recorded from an independent client (tools/oracle/record_capture.py).

use std::path::PathBuf;

use uaengine::engine::capture::Capture;
use uaengine::engine::Engine;
use uaengine::nsimage::acceptance_image;
use uaengine::s3::{EngineConfig, ServicePrograms};
use uaengine::transport::{LocalChannelIds, ServerInfo};

pub const READ_WRITE: &str = "read_write_last_node";
pub const CONNECT_ONLY: &str = "connect_only";

pub fn load(name: &str) -> Capture {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/captures")
        .join(name);
    Capture::load(&dir).unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
}

/// The engine as configured when the captures were recorded.
pub fn engine() -> Engine {
    Engine::new(
        EngineConfig {
            seed: Some(24301),
            ..EngineConfig::default()
        },
        acceptance_image(),
        ServicePrograms::bundled().unwrap(),
        ServerInfo {
            endpoint_url: "opc.tcp://127.0.0.1:48401/".into(),
            ..ServerInfo::default()
        },
        Box::new(LocalChannelIds::default()),
    )
    .unwrap()
}
