//! The engine: connections and chunk routing over the S3 stages, a scripted
//! protocol client, capture replay and the cycle-level timing model.

mod arbiter;
pub mod capture;
pub mod client;
mod driver;
mod host;
mod sim;

pub use arbiter::{max_grant_gap, Arbiter, GRANT_BYTES};
pub use client::{ClientError, ClientEvent, SessionClient};
pub use driver::{session_script, Driver, Next, Op, ReplayDriver, ScriptDriver};
pub use host::{Clock, ConnId, Engine, FrameResult, FrameWork};
pub use sim::{
    run_trace, ClockConfig, CycleTrace, RequestSample, SimConfig, SimError, TraceRecord, UnitState,
    FRAME_HEADER_CYCLES, TRANSPORT_BYTES_PER_CYCLE,
};
