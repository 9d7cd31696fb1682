//! Textual device models.
//!
//! ```text
//! namespace urn:example:device
//! include ns0
//! Object   ns=1;i=1000 Device  parent=i=85 ref=Organizes typedef=i=58
//! Variable ns=1;i=1001 Value1  type=Int32 access=rw value=0 parent=ns=1;i=1000
//! ```
//!
//! Each node line is `<class> <node id> <browse name> [key=value]...`; values
//! may be double-quoted. Keys: `display`, `type`, `access` (`r`, `w`, `rw` or a
//! number), `value`, `cap` (content bytes reserved for variable-length values),
//! `parent`, `ref` (reference type from the parent, default HasComponent) and
//! `typedef`.

use std::collections::BTreeSet;

use crate::codec::{ByteString, DateTime, LocalizedText, NodeId, QualifiedName, Variant};

use super::NsError;

pub const NS0_URI: &str = "http://opcfoundation.org/UA/";

/// The bundled namespace-0 subset.
pub const NS0_SOURCE: &str = include_str!("../../models/ns0.txt");
/// Namespace 0 plus three writable Int32 variables.
pub const ACCEPTANCE_SOURCE: &str = include_str!("../../models/acceptance.txt");

pub mod refs {
    use crate::codec::NodeId;

    pub const ORGANIZES: NodeId = NodeId::numeric(0, 35);
    pub const HAS_TYPE_DEFINITION: NodeId = NodeId::numeric(0, 40);
    pub const HAS_SUBTYPE: NodeId = NodeId::numeric(0, 45);
    pub const HAS_PROPERTY: NodeId = NodeId::numeric(0, 46);
    pub const HAS_COMPONENT: NodeId = NodeId::numeric(0, 47);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeClass {
    Object = 1,
    Variable = 2,
    Method = 4,
    ObjectType = 8,
    VariableType = 16,
    ReferenceType = 32,
    DataType = 64,
    View = 128,
}

impl NodeClass {
    pub const ALL: [NodeClass; 8] = [
        NodeClass::Object,
        NodeClass::Variable,
        NodeClass::Method,
        NodeClass::ObjectType,
        NodeClass::VariableType,
        NodeClass::ReferenceType,
        NodeClass::DataType,
        NodeClass::View,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NodeClass::Object => "Object",
            NodeClass::Variable => "Variable",
            NodeClass::Method => "Method",
            NodeClass::ObjectType => "ObjectType",
            NodeClass::VariableType => "VariableType",
            NodeClass::ReferenceType => "ReferenceType",
            NodeClass::DataType => "DataType",
            NodeClass::View => "View",
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.iter().copied().find(|n| *n as u8 == c)
    }
}

/// Access level bits.
pub const ACCESS_READ: u8 = 0x01;
pub const ACCESS_WRITE: u8 = 0x02;

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub ref_type: NodeId,
    pub target: NodeId,
}

/// Initial value as written in the source; typed during compilation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawValue {
    pub text: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeDef {
    pub line: usize,
    pub id: NodeId,
    pub class: NodeClass,
    pub browse_name: QualifiedName,
    pub display_name: String,
    pub data_type: Option<NodeId>,
    pub access: u8,
    pub value: Option<RawValue>,
    pub capacity: Option<usize>,
    /// Forward references owned by this node.
    pub references: Vec<Reference>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeviceModel {
    /// Namespace URIs, index 0 first.
    pub namespaces: Vec<String>,
    pub nodes: Vec<NodeDef>,
}

fn tokenize(line: &str, number: usize) -> Result<Vec<String>, NsError> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut started = false;
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        match c {
            '"' => {
                quoted = !quoted;
                started = true;
            }
            '\\' if quoted => cur.extend(chars.next()),
            '#' if !quoted => break,
            c if c.is_whitespace() && !quoted => {
                if started {
                    out.push(std::mem::take(&mut cur));
                    started = false;
                }
            }
            c => {
                cur.push(c);
                started = true;
            }
        }
    }
    if quoted {
        return Err(NsError::Parse {
            line: number,
            message: "unterminated quote".into(),
        });
    }
    if started {
        out.push(cur);
    }
    Ok(out)
}

/// Builtin data type names accepted by `type=`.
const TYPE_NAMES: &[(&str, u32)] = &[
    ("Boolean", 1),
    ("SByte", 2),
    ("Byte", 3),
    ("Int16", 4),
    ("UInt16", 5),
    ("Int32", 6),
    ("UInt32", 7),
    ("Int64", 8),
    ("UInt64", 9),
    ("Float", 10),
    ("Double", 11),
    ("String", 12),
    ("DateTime", 13),
    ("Guid", 14),
    ("ByteString", 15),
    ("NodeId", 17),
    ("StatusCode", 19),
    ("QualifiedName", 20),
    ("LocalizedText", 21),
    ("BaseDataType", 24),
];

const REF_NAMES: &[(&str, NodeId)] = &[
    ("Organizes", refs::ORGANIZES),
    ("HasTypeDefinition", refs::HAS_TYPE_DEFINITION),
    ("HasSubtype", refs::HAS_SUBTYPE),
    ("HasProperty", refs::HAS_PROPERTY),
    ("HasComponent", refs::HAS_COMPONENT),
];

fn node_id(s: &str, line: usize) -> Result<NodeId, NsError> {
    s.parse()
        .map_err(|message| NsError::Parse { line, message })
}

fn named_id(s: &str, table: &[(&str, NodeId)], line: usize) -> Result<NodeId, NsError> {
    match table.iter().find(|(n, _)| *n == s) {
        Some((_, id)) => Ok(id.clone()),
        None => node_id(s, line),
    }
}

fn parse_access(s: &str, line: usize) -> Result<u8, NsError> {
    Ok(match s {
        "r" => ACCESS_READ,
        "w" => ACCESS_WRITE,
        "rw" => ACCESS_READ | ACCESS_WRITE,
        "none" => 0,
        n => n.parse().map_err(|_| NsError::Parse {
            line,
            message: format!("bad access level {n:?}"),
        })?,
    })
}

fn parse_node(
    tokens: &[String],
    line: usize,
) -> Result<(NodeDef, Option<(NodeId, NodeId)>), NsError> {
    let bad = |message: String| NsError::Parse { line, message };
    let class = NodeClass::ALL
        .iter()
        .copied()
        .find(|c| c.name() == tokens[0])
        .ok_or_else(|| bad(format!("unknown node class {:?}", tokens[0])))?;
    let [_, id, browse, rest @ ..] = tokens else {
        return Err(bad("expected <class> <node id> <browse name>".into()));
    };
    let id = node_id(id, line)?;
    let browse_name = match browse.split_once(':') {
        Some((ns, name)) if ns.chars().all(|c| c.is_ascii_digit()) && !ns.is_empty() => {
            QualifiedName {
                namespace: ns
                    .parse()
                    .map_err(|_| bad(format!("bad browse name {browse:?}")))?,
                name: Some(name.to_string()),
            }
        }
        _ => QualifiedName {
            namespace: id.namespace,
            name: Some(browse.clone()),
        },
    };
    let mut node = NodeDef {
        line,
        display_name: browse_name.name.clone().unwrap_or_default(),
        id,
        class,
        browse_name,
        data_type: None,
        access: 0,
        value: None,
        capacity: None,
        references: Vec::new(),
    };
    let mut parent = None;
    let mut ref_type = refs::HAS_COMPONENT;
    let mut seen = BTreeSet::new();
    for kv in rest {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, found {kv:?}")))?;
        if !seen.insert(key) {
            return Err(bad(format!("repeated key {key:?}")));
        }
        match key {
            "display" => node.display_name = value.to_string(),
            "type" => {
                let table: Vec<(&str, NodeId)> = TYPE_NAMES
                    .iter()
                    .map(|&(n, i)| (n, NodeId::numeric(0, i)))
                    .collect();
                node.data_type = Some(named_id(value, &table, line)?);
            }
            "access" => node.access = parse_access(value, line)?,
            "value" => {
                node.value = Some(RawValue {
                    text: value.to_string(),
                    line,
                })
            }
            "cap" => {
                node.capacity = Some(
                    value
                        .parse()
                        .map_err(|_| bad(format!("bad capacity {value:?}")))?,
                )
            }
            "parent" => parent = Some(node_id(value, line)?),
            "ref" => ref_type = named_id(value, REF_NAMES, line)?,
            "typedef" => node.references.push(Reference {
                ref_type: refs::HAS_TYPE_DEFINITION,
                target: node_id(value, line)?,
            }),
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }
    if class == NodeClass::Variable && node.data_type.is_none() {
        return Err(bad("variables need type=".into()));
    }
    if class != NodeClass::Variable && (node.value.is_some() || node.data_type.is_some()) {
        return Err(bad("only variables carry type= and value=".into()));
    }
    Ok((node, parent.map(|p| (p, ref_type))))
}

/// Parses a model, expanding `include ns0`.
pub fn parse_model(src: &str) -> Result<DeviceModel, NsError> {
    let mut model = DeviceModel {
        namespaces: vec![NS0_URI.to_string()],
        nodes: Vec::new(),
    };
    parse_into(&mut model, src, true)?;
    Ok(model)
}

fn parse_into(model: &mut DeviceModel, src: &str, top: bool) -> Result<(), NsError> {
    let mut parents: Vec<(usize, NodeId, NodeId)> = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let tokens = tokenize(raw, line)?;
        let Some(head) = tokens.first() else { continue };
        match head.as_str() {
            "namespace" => {
                let [_, uri] = &tokens[..] else {
                    return Err(NsError::Parse {
                        line,
                        message: "namespace takes one URI".into(),
                    });
                };
                model.namespaces.push(uri.clone());
            }
            "include" => {
                if !top || tokens.get(1).map(String::as_str) != Some("ns0") || tokens.len() != 2 {
                    return Err(NsError::Parse {
                        line,
                        message: "only `include ns0` is supported".into(),
                    });
                }
                parse_into(model, NS0_SOURCE, false)?;
            }
            _ => {
                let (node, parent) = parse_node(&tokens, line)?;
                if let Some((p, r)) = parent {
                    parents.push((model.nodes.len(), p, r));
                }
                model.nodes.push(node);
            }
        }
    }
    // Parent links become forward references on the parent.
    for (child, parent, ref_type) in parents {
        let target = model.nodes[child].id.clone();
        let line = model.nodes[child].line;
        let owner = model
            .nodes
            .iter_mut()
            .find(|n| n.id == parent)
            .ok_or_else(|| NsError::UnresolvedReference {
                line,
                target: parent.to_string(),
            })?;
        owner.references.push(Reference { ref_type, target });
    }
    Ok(())
}

fn mismatch(raw: &RawValue, type_name: &str) -> NsError {
    NsError::ValueTypeMismatch {
        line: raw.line,
        value: raw.text.clone(),
        data_type: type_name.to_string(),
    }
}

fn parse_hex(s: &str) -> Option<Vec<u8>> {
    let s = s.strip_prefix("0x")?;
    if s.len() % 2 != 0 {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).ok())
        .collect()
}

/// Types a source value for the given builtin type id.
pub fn typed_value(raw: &RawValue, builtin: u8) -> Result<Variant, NsError> {
    use crate::codec::type_id::*;
    let t = raw.text.as_str();
    let name = TYPE_NAMES
        .iter()
        .find(|(_, i)| *i == builtin as u32)
        .map_or("unsupported", |(n, _)| n);
    let e = || mismatch(raw, name);
    Ok(match builtin {
        BOOLEAN => Variant::Boolean(t.parse().map_err(|_| e())?),
        SBYTE => Variant::SByte(t.parse().map_err(|_| e())?),
        BYTE => Variant::Byte(t.parse().map_err(|_| e())?),
        INT16 => Variant::Int16(t.parse().map_err(|_| e())?),
        UINT16 => Variant::UInt16(t.parse().map_err(|_| e())?),
        INT32 => Variant::Int32(t.parse().map_err(|_| e())?),
        UINT32 => Variant::UInt32(t.parse().map_err(|_| e())?),
        FLOAT => Variant::Float(t.parse().map_err(|_| e())?),
        DOUBLE => Variant::Double(t.parse().map_err(|_| e())?),
        STRING => Variant::String(Some(t.to_string())),
        DATE_TIME => Variant::DateTime(DateTime(t.parse().map_err(|_| e())?)),
        BYTE_STRING => Variant::ByteString(Some(parse_hex(t).ok_or_else(e)?) as ByteString),
        NODE_ID => Variant::NodeId(t.parse().map_err(|_| e())?),
        QUALIFIED_NAME => Variant::QualifiedName(match t.split_once(':') {
            Some((ns, n)) if ns.parse::<u16>().is_ok() => QualifiedName {
                namespace: ns.parse().map_err(|_| e())?,
                name: Some(n.to_string()),
            },
            _ => QualifiedName {
                namespace: 0,
                name: Some(t.to_string()),
            },
        }),
        LOCALIZED_TEXT => Variant::LocalizedText(LocalizedText {
            locale: None,
            text: Some(t.to_string()),
        }),
        _ => return Err(e()),
    })
}
