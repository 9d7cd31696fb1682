//! Compact binary address space ("NSIM" images) and its compiler.
//!
//! Layout, little-endian:
//!
//! | section    | content                                                        |
//! |------------|----------------------------------------------------------------|
//! | header     | `NSIM`, u16 version, u32 nodeCount, u32 indexOffset, u32 totalSize |
//! | index      | nodeCount x (u16 ns, u8 form, u8 0, u32 id or record offset, u32 record offset) |
//! | namespaces | u16 count, then u16-length UTF-8 URIs                          |
//! | records    | NodeId, class, browse name, display name, data type, access, builtin type, slot offset/len, references |
//! | slots      | one Variant per variable, zero-padded to the slot length       |
//!
//! Index entries are sorted by (namespace, identifier form, identifier).

mod compile;
mod image;
mod model;

use thiserror::Error;

pub use compile::{class_histogram, compile, SizeReport, DEFAULT_CAPACITY};
pub use image::{
    verify, NamespaceImage, Record, ATTR_USER_ACCESS_LEVEL, HEADER_LEN, INDEX_ENTRY_LEN,
};
pub use model::{
    parse_model, refs, typed_value, DeviceModel, NodeClass, NodeDef, RawValue, Reference,
    ACCEPTANCE_SOURCE, ACCESS_READ, ACCESS_WRITE, NS0_SOURCE, NS0_URI,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NsError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate node id {id}")]
    DuplicateNodeId { line: usize, id: String },
    #[error("line {line}: data type {data_type} does not resolve to a namespace-0 type")]
    UnresolvedDataType { line: usize, data_type: String },
    #[error("line {line}: data type {data_type} has no supported scalar encoding")]
    UnsupportedDataType { line: usize, data_type: String },
    #[error("line {line}: value {value:?} is not a valid {data_type}")]
    ValueTypeMismatch {
        line: usize,
        value: String,
        data_type: String,
    },
    #[error("line {line}: reference to unknown node {target}")]
    UnresolvedReference { line: usize, target: String },
    #[error("line {line}: namespace index {namespace} not declared")]
    UnknownNamespace { line: usize, namespace: u16 },
    #[error("invalid image: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

/// Parses and compiles model text.
pub fn compile_source(src: &str) -> Result<(Vec<u8>, SizeReport), NsError> {
    compile(&parse_model(src)?)
}

/// The acceptance image, loaded.
pub fn acceptance_image() -> NamespaceImage {
    let (bytes, _) = compile_source(ACCEPTANCE_SOURCE).expect("bundled model compiles");
    NamespaceImage::load(bytes).expect("bundled model verifies")
}
