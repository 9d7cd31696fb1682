//! OPC UA binary encoding for the nano-profile type subset.
//!
//! Everything is little-endian. Strings and byte strings carry an `i32`
//! length prefix where `-1` encodes null. Arrays inside service bodies use
//! the same prefix; an empty array encodes as `0` and a null array decodes
//! to an empty one.

mod mask;
mod service;
mod status;
mod types;

pub use mask::mask_volatile_fields;
pub use service::*;
pub use status::StatusCode;
pub use types::*;

use thiserror::Error;

/// Default cap on decoded string and byte-string lengths.
pub const DEFAULT_MAX_STRING_LEN: usize = 4096;
/// Default cap on decoded array lengths inside service bodies.
pub const DEFAULT_MAX_ARRAY_LEN: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("input truncated: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("malformed encoding at offset {offset}: {reason}")]
    MalformedEncoding { offset: usize, reason: &'static str },
    #[error("declared length {declared} exceeds limit {limit}")]
    LimitExceeded { declared: usize, limit: usize },
    #[error("unsupported type: {0}")]
    UnsupportedType(String),
}

impl CodecError {
    /// Status code a server reports when a request fails to decode.
    pub fn status(&self) -> StatusCode {
        match self {
            CodecError::LimitExceeded { .. } => StatusCode::BAD_ENCODING_LIMITS_EXCEEDED,
            _ => StatusCode::BAD_DECODING_ERROR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeLimits {
    pub max_string_len: usize,
    pub max_array_len: usize,
}

impl Default for DecodeLimits {
    fn default() -> Self {
        DecodeLimits {
            max_string_len: DEFAULT_MAX_STRING_LEN,
            max_array_len: DEFAULT_MAX_ARRAY_LEN,
        }
    }
}

/// Bounds-checked cursor over an input buffer.
#[derive(Debug, Clone)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    limits: DecodeLimits,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader::with_limits(buf, DecodeLimits::default())
    }

    pub fn with_limits(buf: &'a [u8], limits: DecodeLimits) -> Self {
        Reader {
            buf,
            pos: 0,
            limits,
        }
    }

    pub fn limits(&self) -> DecodeLimits {
        self.limits
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    pub fn rest(&self) -> &'a [u8] {
        &self.buf[self.pos..]
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::Truncated {
                offset: self.pos,
                needed: n - self.remaining(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.bytes(N)?);
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.array::<1>()?[0])
    }

    pub fn i8(&mut self) -> Result<i8, CodecError> {
        Ok(self.u8()? as i8)
    }

    pub fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub fn i16(&mut self) -> Result<i16, CodecError> {
        Ok(i16::from_le_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn i32(&mut self) -> Result<i32, CodecError> {
        Ok(i32::from_le_bytes(self.array()?))
    }

    pub fn i64(&mut self) -> Result<i64, CodecError> {
        Ok(i64::from_le_bytes(self.array()?))
    }

    pub fn f32(&mut self) -> Result<f32, CodecError> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    pub fn f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    /// Reads an `i32` length prefix; `None` for null (any negative value).
    fn length(&mut self, limit: usize) -> Result<Option<usize>, CodecError> {
        let n = self.i32()?;
        if n < 0 {
            return Ok(None);
        }
        let n = n as usize;
        if n > limit {
            return Err(CodecError::LimitExceeded { declared: n, limit });
        }
        Ok(Some(n))
    }

    pub fn byte_string(&mut self) -> Result<ByteString, CodecError> {
        match self.length(self.limits.max_string_len)? {
            None => Ok(None),
            Some(n) => Ok(Some(self.bytes(n)?.to_vec())),
        }
    }

    pub fn string(&mut self) -> Result<UaString, CodecError> {
        let start = self.pos;
        match self.byte_string()? {
            None => Ok(None),
            Some(raw) => {
                String::from_utf8(raw)
                    .map(Some)
                    .map_err(|_| CodecError::MalformedEncoding {
                        offset: start,
                        reason: "string is not valid UTF-8",
                    })
            }
        }
    }

    pub fn array_of<T>(
        &mut self,
        mut item: impl FnMut(&mut Self) -> Result<T, CodecError>,
    ) -> Result<Vec<T>, CodecError> {
        match self.length(self.limits.max_array_len)? {
            None => Ok(Vec::new()),
            Some(n) => {
                let mut out = Vec::with_capacity(n.min(64));
                for _ in 0..n {
                    out.push(item(self)?);
                }
                Ok(out)
            }
        }
    }

    pub fn malformed(&self, reason: &'static str) -> CodecError {
        CodecError::MalformedEncoding {
            offset: self.pos,
            reason,
        }
    }
}

/// Little-endian writer helpers over `Vec<u8>`.
pub trait WriteExt {
    fn put_u8(&mut self, v: u8);
    fn put_u16(&mut self, v: u16);
    fn put_u32(&mut self, v: u32);
    fn put_i32(&mut self, v: i32);
    fn put_i64(&mut self, v: i64);
    fn put_byte_string(&mut self, v: Option<&[u8]>);
    fn put_string(&mut self, v: Option<&str>);
    fn put_array<T>(&mut self, items: &[T], each: impl FnMut(&mut Self, &T));
}

impl WriteExt for Vec<u8> {
    fn put_u8(&mut self, v: u8) {
        self.push(v);
    }

    fn put_u16(&mut self, v: u16) {
        self.extend_from_slice(&v.to_le_bytes());
    }

    fn put_u32(&mut self, v: u32) {
        self.extend_from_slice(&v.to_le_bytes());
    }

    fn put_i32(&mut self, v: i32) {
        self.extend_from_slice(&v.to_le_bytes());
    }

    fn put_i64(&mut self, v: i64) {
        self.extend_from_slice(&v.to_le_bytes());
    }

    fn put_byte_string(&mut self, v: Option<&[u8]>) {
        match v {
            None => self.put_i32(-1),
            Some(b) => {
                self.put_i32(b.len() as i32);
                self.extend_from_slice(b);
            }
        }
    }

    fn put_string(&mut self, v: Option<&str>) {
        self.put_byte_string(v.map(str::as_bytes));
    }

    fn put_array<T>(&mut self, items: &[T], mut each: impl FnMut(&mut Self, &T)) {
        self.put_i32(items.len() as i32);
        for item in items {
            each(self, item);
        }
    }
}

/// A value with an OPC UA binary encoding.
pub trait BinaryCodec: Sized {
    fn encode(&self, out: &mut Vec<u8>);
    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError>;

    fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode(&mut out);
        out
    }

    /// Decodes one value from the front of `bytes`, returning the bytes consumed.
    fn from_bytes(bytes: &[u8]) -> Result<(Self, usize), CodecError> {
        let mut r = Reader::new(bytes);
        let v = Self::decode(&mut r)?;
        Ok((v, r.position()))
    }
}

/// The built-in kinds `decode_value` can be asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum ValueKind {
    Boolean,
    SByte,
    Byte,
    Int16,
    UInt16,
    Int32,
    UInt32,
    Float,
    Double,
    String,
    DateTime,
    ByteString,
    NodeId,
    QualifiedName,
    LocalizedText,
    Variant,
    DataValue,
}

/// A decoded value: a bare scalar, a self-describing Variant or a DataValue.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum Value {
    Scalar(Variant),
    Variant(Variant),
    DataValue(DataValue),
}

/// Encodes a value with the OPC UA binary rules.
///
/// Scalars are written without a type byte; `Value::Variant` carries one.
pub fn encode_value(v: &Value) -> Vec<u8> {
    let mut out = Vec::new();
    match v {
        Value::Scalar(s) => s.encode_payload(&mut out),
        Value::Variant(var) => var.encode(&mut out),
        Value::DataValue(dv) => dv.encode(&mut out),
    }
    out
}

/// Decodes one value of the expected kind, reporting the exact bytes consumed.
pub fn decode_value(
    bytes: &[u8],
    expected: ValueKind,
    limits: DecodeLimits,
) -> Result<(Value, usize), CodecError> {
    let mut r = Reader::with_limits(bytes, limits);
    let v = match expected {
        ValueKind::Variant => Value::Variant(Variant::decode(&mut r)?),
        ValueKind::DataValue => Value::DataValue(DataValue::decode(&mut r)?),
        scalar => Value::Scalar(Variant::decode_payload(scalar, &mut r)?),
    };
    Ok((v, r.position()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int32_five() {
        let bytes = encode_value(&Value::Scalar(Variant::Int32(5)));
        assert_eq!(bytes, [0x05, 0, 0, 0]);
    }

    #[test]
    fn null_string() {
        let bytes = encode_value(&Value::Scalar(Variant::String(None)));
        assert_eq!(bytes, [0xFF; 4]);
    }

    #[test]
    fn two_byte_node_id() {
        let bytes = encode_value(&Value::Scalar(Variant::NodeId(NodeId::numeric(0, 5))));
        assert_eq!(bytes, [0x00, 0x05]);
        let (v, n) = decode_value(&bytes, ValueKind::NodeId, DecodeLimits::default()).unwrap();
        assert_eq!(v, Value::Scalar(Variant::NodeId(NodeId::numeric(0, 5))));
        assert_eq!(n, 2);
    }

    #[test]
    fn empty_input_truncated() {
        let err = decode_value(&[], ValueKind::Int32, DecodeLimits::default()).unwrap_err();
        assert!(matches!(err, CodecError::Truncated { .. }));
        for kind in [ValueKind::NodeId, ValueKind::Variant, ValueKind::String] {
            assert!(matches!(
                decode_value(&[], kind, DecodeLimits::default()),
                Err(CodecError::Truncated { .. })
            ));
        }
    }

    #[test]
    fn string_length_over_limit() {
        let limits = DecodeLimits {
            max_string_len: 64 * 1024,
            ..DecodeLimits::default()
        };
        let declared = i32::MAX - 1;
        let bytes = declared.to_le_bytes();
        let err = decode_value(&bytes, ValueKind::String, limits).unwrap_err();
        assert_eq!(
            err,
            CodecError::LimitExceeded {
                declared: declared as usize,
                limit: 64 * 1024
            }
        );
    }

    #[test]
    fn reader_never_reads_past_end() {
        let mut r = Reader::new(&[1, 2, 3]);
        assert!(r.u32().is_err());
        assert_eq!(r.position(), 0);
        assert_eq!(r.u16().unwrap(), 0x0201);
        assert!(r.u16().is_err());
    }
}
