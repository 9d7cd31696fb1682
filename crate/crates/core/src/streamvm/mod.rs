//! The stream processor: a Harvard-architecture VM whose typed instructions
//! move OPC UA values between 16 byte streams.
//!
//! Stream conventions: s0 request body (after the type id), s1 response,
//! s2 namespace port, s3 context (engine timestamp, 8 bytes), s4..s15 scratch.

mod image;
pub mod isa;
pub mod port;
mod stream;
mod vm;

pub use image::{ImageError, VmProgram, IMAGE_MAGIC, IMAGE_VERSION};
pub use isa::{decode_all, Cond, IllegalOpcode, Instruction, TypeTag};
pub use port::{NamespacePort, NodeStore, Probe};
pub use stream::{Mark, Stream};
pub use vm::{
    run_service, MemAccess, Outcome, Region, RunError, RunResult, Step, Trap, Vm, STACK_DEPTH,
    S_CONTEXT, S_PORT, S_REQUEST, S_RESPONSE,
};
