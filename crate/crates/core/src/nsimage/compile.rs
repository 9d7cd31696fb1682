use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

use crate::codec::{type_id, BinaryCodec, NodeId, Variant, WriteExt};

use super::image::{form_rank, HEADER_LEN, INDEX_ENTRY_LEN, MAGIC, VERSION};
use super::model::{refs, typed_value, DeviceModel, NodeClass, NodeDef};
use super::NsError;

/// Content bytes reserved for variable-length values when the model gives none.
pub const DEFAULT_CAPACITY: usize = 32;

/// Bytes per image section; the fields sum to `total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SizeReport {
    pub header: usize,
    pub index: usize,
    pub namespaces: usize,
    pub records: usize,
    pub slots: usize,
    pub total: usize,
}

impl SizeReport {
    pub fn sections(&self) -> [(&'static str, usize); 5] {
        [
            ("header", self.header),
            ("index", self.index),
            ("namespaces", self.namespaces),
            ("records", self.records),
            ("slots", self.slots),
        ]
    }
}

impl fmt::Display for SizeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, bytes) in self.sections() {
            writeln!(f, "{name:<11}{bytes:>7}")?;
        }
        write!(f, "{:<11}{:>7}", "total", self.total)
    }
}

fn supported_builtin(id: u8) -> bool {
    use type_id::*;
    matches!(
        id,
        BOOLEAN
            | SBYTE
            | BYTE
            | INT16
            | UINT16
            | INT32
            | UINT32
            | FLOAT
            | DOUBLE
            | STRING
            | DATE_TIME
            | BYTE_STRING
            | NODE_ID
            | QUALIFIED_NAME
            | LOCALIZED_TEXT
    )
}

/// Fixed payload size, or `None` for variable-length types.
fn fixed_size(builtin: u8) -> Option<usize> {
    use type_id::*;
    match builtin {
        BOOLEAN | SBYTE | BYTE => Some(1),
        INT16 | UINT16 => Some(2),
        INT32 | UINT32 | FLOAT => Some(4),
        DOUBLE | DATE_TIME => Some(8),
        _ => None,
    }
}

const ENUMERATION: u32 = 29;
const BASE_DATA_TYPE: u32 = 24;
const STRUCTURE: u32 = 22;

/// Builtin encoding of a data type node, following HasSubtype towards the
/// root. Abstract roots map to 0.
fn builtin_of(
    data_type: &NodeId,
    classes: &HashMap<&NodeId, NodeClass>,
    supertypes: &HashMap<&NodeId, &NodeId>,
) -> Option<u8> {
    let mut cur = data_type;
    for _ in 0..64 {
        if classes.get(cur) != Some(&NodeClass::DataType) {
            return None;
        }
        if cur.namespace == 0 {
            match cur.as_numeric() {
                Some(ENUMERATION) => return Some(type_id::INT32),
                Some(BASE_DATA_TYPE | STRUCTURE) => return Some(0),
                Some(n @ 1..=21) => return Some(n as u8),
                _ => {}
            }
        }
        cur = supertypes.get(cur)?;
    }
    None
}

struct Prepared<'a> {
    def: &'a NodeDef,
    builtin: u8,
    value: Variant,
    slot_len: usize,
}

fn prepare(model: &DeviceModel) -> Result<Vec<Prepared<'_>>, NsError> {
    let mut classes = HashMap::new();
    for n in &model.nodes {
        if n.id.namespace as usize >= model.namespaces.len() {
            return Err(NsError::UnknownNamespace {
                line: n.line,
                namespace: n.id.namespace,
            });
        }
        if classes.insert(&n.id, n.class).is_some() {
            return Err(NsError::DuplicateNodeId {
                line: n.line,
                id: n.id.to_string(),
            });
        }
    }
    let mut supertypes = HashMap::new();
    for n in &model.nodes {
        for r in &n.references {
            if !classes.contains_key(&r.target) {
                return Err(NsError::UnresolvedReference {
                    line: n.line,
                    target: r.target.to_string(),
                });
            }
            if r.ref_type == refs::HAS_SUBTYPE {
                supertypes.insert(&r.target, &n.id);
            }
        }
    }
    model
        .nodes
        .iter()
        .map(|def| {
            let Some(dt) = &def.data_type else {
                return Ok(Prepared {
                    def,
                    builtin: 0,
                    value: Variant::Empty,
                    slot_len: 0,
                });
            };
            let builtin = builtin_of(dt, &classes, &supertypes).ok_or_else(|| {
                NsError::UnresolvedDataType {
                    line: def.line,
                    data_type: dt.to_string(),
                }
            })?;
            if builtin != 0 && !supported_builtin(builtin) {
                return Err(NsError::UnsupportedDataType {
                    line: def.line,
                    data_type: dt.to_string(),
                });
            }
            let value = match &def.value {
                Some(raw) => typed_value(raw, builtin)?,
                None => Variant::Empty,
            };
            let mut payload = Vec::new();
            value.encode_payload(&mut payload);
            let capacity = match (builtin, fixed_size(builtin)) {
                (0, _) => 0,
                (_, Some(n)) => n,
                // The length prefix is not counted in `cap`.
                (_, None) => {
                    4 + def
                        .capacity
                        .unwrap_or(DEFAULT_CAPACITY)
                        .max(payload.len().saturating_sub(4))
                }
            };
            Ok(Prepared {
                def,
                builtin,
                value,
                slot_len: 1 + capacity,
            })
        })
        .collect()
}

fn put_short_str(out: &mut Vec<u8>, s: &str) {
    out.put_u16(s.len() as u16);
    out.extend_from_slice(s.as_bytes());
}

/// Compiles a validated model into a namespace image and its size report.
pub fn compile(model: &DeviceModel) -> Result<(Vec<u8>, SizeReport), NsError> {
    let mut nodes = prepare(model)?;
    nodes.sort_by(|a, b| a.def.id.cmp(&b.def.id));
    for n in &nodes {
        for s in [
            n.def.browse_name.name.as_deref().unwrap_or(""),
            &n.def.display_name,
        ] {
            if s.len() > u16::MAX as usize {
                return Err(NsError::Parse {
                    line: n.def.line,
                    message: "name longer than 65535 bytes".into(),
                });
            }
        }
    }
    let count = nodes.len();
    let index_len = count * INDEX_ENTRY_LEN;

    let mut ns_table = Vec::new();
    ns_table.put_u16(model.namespaces.len() as u16);
    for uri in &model.namespaces {
        put_short_str(&mut ns_table, uri);
    }

    // Records first with placeholder slot offsets, then patch once sizes are known.
    let records_start = HEADER_LEN + index_len + ns_table.len();
    let mut records = Vec::new();
    let mut record_offsets = Vec::with_capacity(count);
    let mut slot_fields = Vec::with_capacity(count);
    for n in &nodes {
        record_offsets.push(records_start + records.len());
        let d = n.def;
        d.id.encode(&mut records);
        records.put_u8(d.class as u8);
        records.put_u16(d.browse_name.namespace);
        put_short_str(&mut records, d.browse_name.name.as_deref().unwrap_or(""));
        put_short_str(&mut records, &d.display_name);
        d.data_type
            .clone()
            .unwrap_or(NodeId::NULL)
            .encode(&mut records);
        records.put_u8(d.access);
        records.put_u8(n.builtin);
        slot_fields.push(records.len());
        records.put_u32(0);
        records.put_u16(0);
        // Sorted so the record does not depend on model line order.
        let mut refs: Vec<_> = d.references.iter().collect();
        refs.sort_by(|a, b| (&a.ref_type, &a.target).cmp(&(&b.ref_type, &b.target)));
        records.put_u16(refs.len() as u16);
        for r in refs {
            r.ref_type.encode(&mut records);
            r.target.encode(&mut records);
        }
    }

    let slots_start = records_start + records.len();
    let mut slots = Vec::new();
    for (n, &field) in nodes.iter().zip(&slot_fields) {
        if n.def.class != NodeClass::Variable {
            continue;
        }
        let offset = slots_start + slots.len();
        records[field..field + 4].copy_from_slice(&(offset as u32).to_le_bytes());
        records[field + 4..field + 6].copy_from_slice(&(n.slot_len as u16).to_le_bytes());
        let start = slots.len();
        n.value.encode(&mut slots);
        slots.resize(start + n.slot_len, 0);
    }

    let total = slots_start + slots.len();
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(MAGIC);
    out.put_u16(VERSION);
    out.put_u32(count as u32);
    out.put_u32(HEADER_LEN as u32);
    out.put_u32(total as u32);
    for (n, &off) in nodes.iter().zip(&record_offsets) {
        let id = &n.def.id;
        out.put_u16(id.namespace);
        out.put_u8(form_rank(id));
        out.put_u8(0);
        out.put_u32(id.as_numeric().unwrap_or(off as u32));
        out.put_u32(off as u32);
    }
    out.extend_from_slice(&ns_table);
    out.extend_from_slice(&records);
    out.extend_from_slice(&slots);
    debug_assert_eq!(out.len(), total);

    let report = SizeReport {
        header: HEADER_LEN,
        index: index_len,
        namespaces: ns_table.len(),
        records: records.len(),
        slots: slots.len(),
        total,
    };
    Ok((out, report))
}

/// Nodes per class, for reports.
pub fn class_histogram(model: &DeviceModel) -> BTreeMap<&'static str, usize> {
    let mut h = BTreeMap::new();
    for n in &model.nodes {
        *h.entry(n.class.name()).or_default() += 1;
    }
    h
}
