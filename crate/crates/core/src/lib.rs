//! OPC UA nano-profile engine.
//!
//! The crate covers the wire codec, the transport stage, the per-session S3
//! stages, the stream VM with its assembler, the compact namespace image and
//! a deterministic cycle simulator that composes all of them.

pub mod asm;
pub mod codec;
pub mod engine;
pub mod nsimage;
pub mod s3;
pub mod streamvm;
pub mod transport;
