use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{BinaryCodec, CodecError, Reader, StatusCode, ValueKind, WriteExt};

/// Nullable UTF-8 string.
pub type UaString = Option<String>;
/// Nullable byte string.
pub type ByteString = Option<Vec<u8>>;

/// 100-nanosecond ticks since 1601-01-01 UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
#[serde(transparent)]
pub struct DateTime(pub i64);

impl DateTime {
    /// Ticks between 1601-01-01 and 1970-01-01.
    pub const UNIX_EPOCH_TICKS: i64 = 116_444_736_000_000_000;

    pub fn from_unix_nanos(nanos: i128) -> Self {
        DateTime(Self::UNIX_EPOCH_TICKS + (nanos / 100) as i64)
    }

    pub fn now() -> Self {
        let since = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .unwrap_or_default();
        Self::from_unix_nanos(since.as_nanos() as i128)
    }
}

/// GUID in wire byte order (Data1..Data3 little-endian, Data4 as-is).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Guid(pub [u8; 16]);

impl fmt::Debug for Guid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Guid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = &self.0;
        let d1 = u32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        let d2 = u16::from_le_bytes([b[4], b[5]]);
        let d3 = u16::from_le_bytes([b[6], b[7]]);
        write!(f, "{d1:08x}-{d2:04x}-{d3:04x}-{:02x}{:02x}-", b[8], b[9])?;
        for x in &b[10..] {
            write!(f, "{x:02x}")?;
        }
        Ok(())
    }
}

impl FromStr for Guid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex: String = s.chars().filter(|c| *c != '-').collect();
        if hex.len() != 32 || s.len() != 36 {
            return Err(format!("malformed guid {s:?}"));
        }
        let mut raw = [0u8; 16];
        for (i, byte) in raw.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(|_| format!("malformed guid {s:?}"))?;
        }
        let mut out = raw;
        out[0..4].copy_from_slice(&[raw[3], raw[2], raw[1], raw[0]]);
        out[4..6].copy_from_slice(&[raw[5], raw[4]]);
        out[6..8].copy_from_slice(&[raw[7], raw[6]]);
        Ok(Guid(out))
    }
}

impl Serialize for Guid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Identifier {
    Numeric(u32),
    String(String),
    Guid(Guid),
    ByteString(Vec<u8>),
}

impl Identifier {
    fn rank(&self) -> u8 {
        match self {
            Identifier::Numeric(_) => 0,
            Identifier::String(_) => 1,
            Identifier::Guid(_) => 2,
            Identifier::ByteString(_) => 3,
        }
    }
}

impl Ord for Identifier {
    fn cmp(&self, other: &Self) -> Ordering {
        use Identifier::*;
        match (self, other) {
            (Numeric(a), Numeric(b)) => a.cmp(b),
            (String(a), String(b)) => a.as_bytes().cmp(b.as_bytes()),
            (Guid(a), Guid(b)) => a.cmp(b),
            (ByteString(a), ByteString(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Identifier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Wire encoding forms of a NodeId.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeIdForm {
    TwoByte = 0,
    FourByte = 1,
    Numeric = 2,
    String = 3,
    Guid = 4,
    ByteString = 5,
}

/// Node identifier. Ordered by (namespace, identifier form, identifier).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId {
    pub namespace: u16,
    pub identifier: Identifier,
}

impl NodeId {
    pub const NULL: NodeId = NodeId {
        namespace: 0,
        identifier: Identifier::Numeric(0),
    };

    pub const fn numeric(namespace: u16, id: u32) -> Self {
        NodeId {
            namespace,
            identifier: Identifier::Numeric(id),
        }
    }

    pub fn string(namespace: u16, id: impl Into<String>) -> Self {
        NodeId {
            namespace,
            identifier: Identifier::String(id.into()),
        }
    }

    pub fn is_null(&self) -> bool {
        *self == Self::NULL
    }

    pub fn as_numeric(&self) -> Option<u32> {
        match self.identifier {
            Identifier::Numeric(n) => Some(n),
            _ => None,
        }
    }

    /// Shortest legal wire form.
    pub fn form(&self) -> NodeIdForm {
        match &self.identifier {
            Identifier::Numeric(id) if self.namespace == 0 && *id <= 0xFF => NodeIdForm::TwoByte,
            Identifier::Numeric(id) if self.namespace <= 0xFF && *id <= 0xFFFF => {
                NodeIdForm::FourByte
            }
            Identifier::Numeric(_) => NodeIdForm::Numeric,
            Identifier::String(_) => NodeIdForm::String,
            Identifier::Guid(_) => NodeIdForm::Guid,
            Identifier::ByteString(_) => NodeIdForm::ByteString,
        }
    }
}

impl Default for NodeId {
    fn default() -> Self {
        NodeId::NULL
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.namespace != 0 {
            write!(f, "ns={};", self.namespace)?;
        }
        match &self.identifier {
            Identifier::Numeric(n) => write!(f, "i={n}"),
            Identifier::String(s) => write!(f, "s={s}"),
            Identifier::Guid(g) => write!(f, "g={g}"),
            Identifier::ByteString(b) => {
                write!(f, "b=")?;
                b.iter().try_for_each(|x| write!(f, "{x:02x}"))
            }
        }
    }
}

impl FromStr for NodeId {
    type Err = String;

    /// Parses `i=5`, `ns=1;i=5`, `ns=1;s=Name`, `ns=1;g=<guid>` or `ns=1;b=<hex>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (namespace, rest) = match s.strip_prefix("ns=") {
            Some(tail) => {
                let (ns, rest) = tail
                    .split_once(';')
                    .ok_or_else(|| format!("malformed node id {s:?}"))?;
                let ns = ns
                    .parse::<u16>()
                    .map_err(|_| format!("bad namespace index in {s:?}"))?;
                (ns, rest)
            }
            None => (0, s),
        };
        let identifier = if let Some(v) = rest.strip_prefix("i=") {
            Identifier::Numeric(
                v.parse()
                    .map_err(|_| format!("bad numeric identifier in {s:?}"))?,
            )
        } else if let Some(v) = rest.strip_prefix("s=") {
            Identifier::String(v.to_string())
        } else if let Some(v) = rest.strip_prefix("g=") {
            Identifier::Guid(v.parse()?)
        } else if let Some(v) = rest.strip_prefix("b=") {
            if v.len() % 2 != 0 {
                return Err(format!("odd-length byte identifier in {s:?}"));
            }
            let bytes = (0..v.len())
                .step_by(2)
                .map(|i| u8::from_str_radix(&v[i..i + 2], 16))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| format!("bad byte identifier in {s:?}"))?;
            Identifier::ByteString(bytes)
        } else {
            return Err(format!("malformed node id {s:?}"));
        };
        Ok(NodeId {
            namespace,
            identifier,
        })
    }
}

impl BinaryCodec for NodeId {
    fn encode(&self, out: &mut Vec<u8>) {
        let form = self.form();
        out.put_u8(form as u8);
        match (&self.identifier, form) {
            (Identifier::Numeric(id), NodeIdForm::TwoByte) => out.put_u8(*id as u8),
            (Identifier::Numeric(id), NodeIdForm::FourByte) => {
                out.put_u8(self.namespace as u8);
                out.put_u16(*id as u16);
            }
            (Identifier::Numeric(id), _) => {
                out.put_u16(self.namespace);
                out.put_u32(*id);
            }
            (Identifier::String(s), _) => {
                out.put_u16(self.namespace);
                out.put_string(Some(s));
            }
            (Identifier::Guid(g), _) => {
                out.put_u16(self.namespace);
                out.extend_from_slice(&g.0);
            }
            (Identifier::ByteString(b), _) => {
                out.put_u16(self.namespace);
                out.put_byte_string(Some(b));
            }
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let start = r.position();
        let encoding = r.u8()?;
        let (namespace, identifier) = match encoding {
            0 => (0, Identifier::Numeric(r.u8()? as u32)),
            1 => {
                let ns = r.u8()? as u16;
                (ns, Identifier::Numeric(r.u16()? as u32))
            }
            2 => {
                let ns = r.u16()?;
                (ns, Identifier::Numeric(r.u32()?))
            }
            3 => {
                let ns = r.u16()?;
                match r.string()? {
                    Some(s) => (ns, Identifier::String(s)),
                    None => {
                        return Err(CodecError::MalformedEncoding {
                            offset: start,
                            reason: "null string node identifier",
                        })
                    }
                }
            }
            4 => {
                let ns = r.u16()?;
                let mut g = [0u8; 16];
                g.copy_from_slice(r.bytes(16)?);
                (ns, Identifier::Guid(Guid(g)))
            }
            5 => {
                let ns = r.u16()?;
                match r.byte_string()? {
                    Some(b) => (ns, Identifier::ByteString(b)),
                    None => {
                        return Err(CodecError::MalformedEncoding {
                            offset: start,
                            reason: "null byte-string node identifier",
                        })
                    }
                }
            }
            _ => {
                return Err(CodecError::MalformedEncoding {
                    offset: start,
                    reason: "unknown NodeId encoding byte",
                })
            }
        };
        Ok(NodeId {
            namespace,
            identifier,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
pub struct QualifiedName {
    pub namespace: u16,
    pub name: UaString,
}

impl QualifiedName {
    pub fn new(namespace: u16, name: impl Into<String>) -> Self {
        QualifiedName {
            namespace,
            name: Some(name.into()),
        }
    }
}

impl BinaryCodec for QualifiedName {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u16(self.namespace);
        out.put_string(self.name.as_deref());
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(QualifiedName {
            namespace: r.u16()?,
            name: r.string()?,
        })
    }
}

/// Text with an optional locale. Bit 0 of the mask marks the locale, bit 1 the text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
pub struct LocalizedText {
    pub locale: UaString,
    pub text: UaString,
}

impl LocalizedText {
    pub fn text(text: impl Into<String>) -> Self {
        LocalizedText {
            locale: None,
            text: Some(text.into()),
        }
    }
}

impl BinaryCodec for LocalizedText {
    fn encode(&self, out: &mut Vec<u8>) {
        let mask = self.locale.is_some() as u8 | (self.text.is_some() as u8) << 1;
        out.put_u8(mask);
        if let Some(locale) = &self.locale {
            out.put_string(Some(locale));
        }
        if let Some(text) = &self.text {
            out.put_string(Some(text));
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let mask = r.u8()?;
        if mask & !0x03 != 0 {
            return Err(r.malformed("unknown LocalizedText mask bits"));
        }
        // A present-but-null string is not canonical; keep it as absent.
        let locale = if mask & 1 != 0 { r.string()? } else { None };
        let text = if mask & 2 != 0 { r.string()? } else { None };
        Ok(LocalizedText { locale, text })
    }
}

/// Built-in type ids used in Variant encoding bytes.
pub mod type_id {
    pub const EMPTY: u8 = 0;
    pub const BOOLEAN: u8 = 1;
    pub const SBYTE: u8 = 2;
    pub const BYTE: u8 = 3;
    pub const INT16: u8 = 4;
    pub const UINT16: u8 = 5;
    pub const INT32: u8 = 6;
    pub const UINT32: u8 = 7;
    pub const FLOAT: u8 = 10;
    pub const DOUBLE: u8 = 11;
    pub const STRING: u8 = 12;
    pub const DATE_TIME: u8 = 13;
    pub const BYTE_STRING: u8 = 15;
    pub const NODE_ID: u8 = 17;
    pub const QUALIFIED_NAME: u8 = 20;
    pub const LOCALIZED_TEXT: u8 = 21;
}

/// Scalar Variant restricted to the nano-profile type subset. Arrays are not supported.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub enum Variant {
    #[default]
    Empty,
    Boolean(bool),
    SByte(i8),
    Byte(u8),
    Int16(i16),
    UInt16(u16),
    Int32(i32),
    UInt32(u32),
    Float(f32),
    Double(f64),
    String(UaString),
    DateTime(DateTime),
    ByteString(ByteString),
    NodeId(NodeId),
    QualifiedName(QualifiedName),
    LocalizedText(LocalizedText),
}

impl Variant {
    pub fn type_id(&self) -> u8 {
        use type_id::*;
        match self {
            Variant::Empty => EMPTY,
            Variant::Boolean(_) => BOOLEAN,
            Variant::SByte(_) => SBYTE,
            Variant::Byte(_) => BYTE,
            Variant::Int16(_) => INT16,
            Variant::UInt16(_) => UINT16,
            Variant::Int32(_) => INT32,
            Variant::UInt32(_) => UINT32,
            Variant::Float(_) => FLOAT,
            Variant::Double(_) => DOUBLE,
            Variant::String(_) => STRING,
            Variant::DateTime(_) => DATE_TIME,
            Variant::ByteString(_) => BYTE_STRING,
            Variant::NodeId(_) => NODE_ID,
            Variant::QualifiedName(_) => QUALIFIED_NAME,
            Variant::LocalizedText(_) => LOCALIZED_TEXT,
        }
    }

    pub fn kind(&self) -> Option<ValueKind> {
        kind_for_type_id(self.type_id())
    }

    /// Writes the value without the Variant type byte.
    pub fn encode_payload(&self, out: &mut Vec<u8>) {
        match self {
            Variant::Empty => {}
            Variant::Boolean(v) => out.put_u8(*v as u8),
            Variant::SByte(v) => out.put_u8(*v as u8),
            Variant::Byte(v) => out.put_u8(*v),
            Variant::Int16(v) => out.extend_from_slice(&v.to_le_bytes()),
            Variant::UInt16(v) => out.put_u16(*v),
            Variant::Int32(v) => out.put_i32(*v),
            Variant::UInt32(v) => out.put_u32(*v),
            Variant::Float(v) => out.extend_from_slice(&v.to_le_bytes()),
            Variant::Double(v) => out.extend_from_slice(&v.to_le_bytes()),
            Variant::String(v) => out.put_string(v.as_deref()),
            Variant::DateTime(v) => out.put_i64(v.0),
            Variant::ByteString(v) => out.put_byte_string(v.as_deref()),
            Variant::NodeId(v) => v.encode(out),
            Variant::QualifiedName(v) => v.encode(out),
            Variant::LocalizedText(v) => v.encode(out),
        }
    }

    /// Reads a bare scalar of the given kind.
    pub fn decode_payload(kind: ValueKind, r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(match kind {
            ValueKind::Boolean => Variant::Boolean(r.u8()? != 0),
            ValueKind::SByte => Variant::SByte(r.i8()?),
            ValueKind::Byte => Variant::Byte(r.u8()?),
            ValueKind::Int16 => Variant::Int16(r.i16()?),
            ValueKind::UInt16 => Variant::UInt16(r.u16()?),
            ValueKind::Int32 => Variant::Int32(r.i32()?),
            ValueKind::UInt32 => Variant::UInt32(r.u32()?),
            ValueKind::Float => Variant::Float(r.f32()?),
            ValueKind::Double => Variant::Double(r.f64()?),
            ValueKind::String => Variant::String(r.string()?),
            ValueKind::DateTime => Variant::DateTime(DateTime(r.i64()?)),
            ValueKind::ByteString => Variant::ByteString(r.byte_string()?),
            ValueKind::NodeId => Variant::NodeId(NodeId::decode(r)?),
            ValueKind::QualifiedName => Variant::QualifiedName(QualifiedName::decode(r)?),
            ValueKind::LocalizedText => Variant::LocalizedText(LocalizedText::decode(r)?),
            ValueKind::Variant | ValueKind::DataValue => {
                return Err(CodecError::UnsupportedType(format!(
                    "{kind:?} is not a scalar kind"
                )))
            }
        })
    }
}

/// Maps a Variant type id onto the supported scalar kinds.
pub fn kind_for_type_id(id: u8) -> Option<ValueKind> {
    use type_id::*;
    Some(match id {
        BOOLEAN => ValueKind::Boolean,
        SBYTE => ValueKind::SByte,
        BYTE => ValueKind::Byte,
        INT16 => ValueKind::Int16,
        UINT16 => ValueKind::UInt16,
        INT32 => ValueKind::Int32,
        UINT32 => ValueKind::UInt32,
        FLOAT => ValueKind::Float,
        DOUBLE => ValueKind::Double,
        STRING => ValueKind::String,
        DATE_TIME => ValueKind::DateTime,
        BYTE_STRING => ValueKind::ByteString,
        NODE_ID => ValueKind::NodeId,
        QUALIFIED_NAME => ValueKind::QualifiedName,
        LOCALIZED_TEXT => ValueKind::LocalizedText,
        _ => return None,
    })
}

impl BinaryCodec for Variant {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u8(self.type_id());
        self.encode_payload(out);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let encoding = r.u8()?;
        if encoding & 0xC0 != 0 {
            return Err(CodecError::UnsupportedType("Variant arrays".into()));
        }
        if encoding == type_id::EMPTY {
            return Ok(Variant::Empty);
        }
        match kind_for_type_id(encoding) {
            Some(kind) => Variant::decode_payload(kind, r),
            None => Err(CodecError::UnsupportedType(format!(
                "Variant type id {encoding}"
            ))),
        }
    }
}

/// Value with optional status and timestamps.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DataValue {
    pub value: Option<Variant>,
    pub status: Option<StatusCode>,
    pub source_timestamp: Option<DateTime>,
    pub source_picoseconds: Option<u16>,
    pub server_timestamp: Option<DateTime>,
    pub server_picoseconds: Option<u16>,
}

impl DataValue {
    pub fn value(v: Variant) -> Self {
        DataValue {
            value: Some(v),
            ..DataValue::default()
        }
    }

    pub fn status(status: StatusCode) -> Self {
        DataValue {
            status: Some(status),
            ..DataValue::default()
        }
    }

    pub fn mask(&self) -> u8 {
        (self.value.is_some() as u8)
            | (self.status.is_some() as u8) << 1
            | (self.source_timestamp.is_some() as u8) << 2
            | (self.server_timestamp.is_some() as u8) << 3
            | (self.source_picoseconds.is_some() as u8) << 4
            | (self.server_picoseconds.is_some() as u8) << 5
    }
}

impl BinaryCodec for DataValue {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u8(self.mask());
        if let Some(v) = &self.value {
            v.encode(out);
        }
        if let Some(s) = self.status {
            out.put_u32(s.0);
        }
        if let Some(t) = self.source_timestamp {
            out.put_i64(t.0);
        }
        if let Some(p) = self.source_picoseconds {
            out.put_u16(p);
        }
        if let Some(t) = self.server_timestamp {
            out.put_i64(t.0);
        }
        if let Some(p) = self.server_picoseconds {
            out.put_u16(p);
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let mask = r.u8()?;
        if mask & 0xC0 != 0 {
            return Err(r.malformed("unknown DataValue mask bits"));
        }
        let value = if mask & 0x01 != 0 {
            Some(Variant::decode(r)?)
        } else {
            None
        };
        let status = if mask & 0x02 != 0 {
            Some(StatusCode(r.u32()?))
        } else {
            None
        };
        let source_timestamp = if mask & 0x04 != 0 {
            Some(DateTime(r.i64()?))
        } else {
            None
        };
        let source_picoseconds = if mask & 0x10 != 0 {
            Some(r.u16()?)
        } else {
            None
        };
        let server_timestamp = if mask & 0x08 != 0 {
            Some(DateTime(r.i64()?))
        } else {
            None
        };
        let server_picoseconds = if mask & 0x20 != 0 {
            Some(r.u16()?)
        } else {
            None
        };
        Ok(DataValue {
            value,
            status,
            source_timestamp,
            source_picoseconds,
            server_timestamp,
            server_picoseconds,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub enum ExtensionBody {
    #[default]
    None,
    Binary(Vec<u8>),
    Xml(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ExtensionObject {
    pub type_id: NodeId,
    pub body: ExtensionBody,
}

impl ExtensionObject {
    pub fn binary(type_id: NodeId, body: Vec<u8>) -> Self {
        ExtensionObject {
            type_id,
            body: ExtensionBody::Binary(body),
        }
    }

    pub fn is_null(&self) -> bool {
        self.type_id.is_null() && self.body == ExtensionBody::None
    }
}

impl BinaryCodec for ExtensionObject {
    fn encode(&self, out: &mut Vec<u8>) {
        self.type_id.encode(out);
        match &self.body {
            ExtensionBody::None => out.put_u8(0),
            ExtensionBody::Binary(b) => {
                out.put_u8(1);
                out.put_byte_string(Some(b));
            }
            ExtensionBody::Xml(b) => {
                out.put_u8(2);
                out.put_byte_string(Some(b));
            }
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let type_id = NodeId::decode(r)?;
        let body = match r.u8()? {
            0 => ExtensionBody::None,
            1 => ExtensionBody::Binary(r.byte_string()?.unwrap_or_default()),
            2 => ExtensionBody::Xml(r.byte_string()?.unwrap_or_default()),
            _ => return Err(r.malformed("unknown ExtensionObject encoding")),
        };
        Ok(ExtensionObject { type_id, body })
    }
}

/// Diagnostics are never produced; only the empty encoding (mask 0) is accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DiagnosticInfo;

impl BinaryCodec for DiagnosticInfo {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u8(0);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        match r.u8()? {
            0 => Ok(DiagnosticInfo),
            _ => Err(CodecError::UnsupportedType(
                "non-empty DiagnosticInfo".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_id_forms() {
        assert_eq!(NodeId::numeric(0, 255).form(), NodeIdForm::TwoByte);
        assert_eq!(NodeId::numeric(0, 256).form(), NodeIdForm::FourByte);
        assert_eq!(NodeId::numeric(1, 5).form(), NodeIdForm::FourByte);
        assert_eq!(NodeId::numeric(256, 5).form(), NodeIdForm::Numeric);
        assert_eq!(NodeId::numeric(1, 65536).form(), NodeIdForm::Numeric);
        assert_eq!(NodeId::numeric(1, 0x0403).to_bytes(), [1, 1, 3, 4]);
    }

    #[test]
    fn qualified_name_top_namespace() {
        use crate::codec::{decode_value, encode_value, DecodeLimits, Value};
        let q = QualifiedName {
            namespace: u16::MAX,
            name: Some("x".into()),
        };
        let bytes = encode_value(&Value::Scalar(Variant::QualifiedName(q.clone())));
        assert_eq!(bytes, [0xff, 0xff, 1, 0, 0, 0, b'x']);
        let (back, used) = decode_value(&bytes, ValueKind::QualifiedName, DecodeLimits::default()).unwrap();
        assert_eq!((back, used), (Value::Scalar(Variant::QualifiedName(q)), 7));
    }

    #[test]
    fn node_id_text() {
        for s in ["i=85", "ns=1;i=1003", "ns=2;s=Pump.Speed", "ns=3;b=00ff10"] {
            let id: NodeId = s.parse().unwrap();
            assert_eq!(id.to_string(), s);
        }
        let g: NodeId = "ns=1;g=72962b91-fa75-4ae6-8d28-b404dc7daf63"
            .parse()
            .unwrap();
        assert_eq!(g.to_string(), "ns=1;g=72962b91-fa75-4ae6-8d28-b404dc7daf63");
        assert_eq!(
            &g.to_bytes()[3..7],
            &[0x91, 0x2b, 0x96, 0x72],
            "Data1 is little-endian on the wire"
        );
        assert!("ns=x;i=1".parse::<NodeId>().is_err());
        assert!("q=1".parse::<NodeId>().is_err());
    }

    #[test]
    fn node_id_ordering_by_form_then_identifier() {
        let mut ids = vec![
            NodeId::string(1, "b"),
            NodeId::numeric(1, 70000),
            NodeId::string(1, "a"),
            NodeId::numeric(0, 5),
            NodeId::numeric(1, 3),
        ];
        ids.sort();
        assert_eq!(
            ids,
            vec![
                NodeId::numeric(0, 5),
                NodeId::numeric(1, 3),
                NodeId::numeric(1, 70000),
                NodeId::string(1, "a"),
                NodeId::string(1, "b"),
            ]
        );
    }

    #[test]
    fn unknown_node_id_encoding_is_malformed() {
        assert!(matches!(
            NodeId::from_bytes(&[0x06, 0, 0]),
            Err(CodecError::MalformedEncoding { .. })
        ));
        assert!(matches!(
            NodeId::from_bytes(&[0x80, 0]),
            Err(CodecError::MalformedEncoding { .. })
        ));
    }

    #[test]
    fn localized_text_mask() {
        let lt = LocalizedText {
            locale: Some("a".into()),
            text: Some("b".into()),
        };
        let bytes = lt.to_bytes();
        assert_eq!(bytes.len(), 1 + 5 + 5);
        assert_eq!(bytes[0], 0x03);
        assert_eq!(LocalizedText::default().to_bytes(), [0]);
        assert_eq!(LocalizedText::text("x").to_bytes()[0], 0x02);
    }

    #[test]
    fn variant_rejects_arrays_and_unsupported_types() {
        assert!(matches!(
            Variant::from_bytes(&[0x86, 0, 0, 0, 0]),
            Err(CodecError::UnsupportedType(_))
        ));
        assert!(matches!(
            Variant::from_bytes(&[8, 0, 0, 0, 0, 0, 0, 0, 0]),
            Err(CodecError::UnsupportedType(_))
        ));
    }

    #[test]
    fn data_value_field_order() {
        let dv = DataValue {
            value: Some(Variant::Byte(7)),
            status: None,
            source_timestamp: Some(DateTime(1)),
            source_picoseconds: Some(2),
            server_timestamp: Some(DateTime(3)),
            server_picoseconds: None,
        };
        let bytes = dv.to_bytes();
        assert_eq!(bytes[0], 0x01 | 0x04 | 0x08 | 0x10);
        assert_eq!(&bytes[1..3], &[3, 7]);
        assert_eq!(&bytes[3..11], &1i64.to_le_bytes());
        assert_eq!(&bytes[11..13], &2u16.to_le_bytes());
        assert_eq!(&bytes[13..21], &3i64.to_le_bytes());
        assert_eq!(DataValue::from_bytes(&bytes).unwrap(), (dv, 21));
    }
}
