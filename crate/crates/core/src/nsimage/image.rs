use std::cmp::Ordering;

use crate::codec::{
    BinaryCodec, Identifier, LocalizedText, NodeId, QualifiedName, Reader, StatusCode, Variant,
};
use crate::streamvm::port::{
    NodeStore, Probe, ATTR_ACCESS_LEVEL, ATTR_BROWSE_NAME, ATTR_DATA_TYPE, ATTR_DISPLAY_NAME,
    ATTR_NODE_CLASS, ATTR_NODE_ID, ATTR_VALUE,
};

use super::model::{NodeClass, ACCESS_WRITE};
use super::NsError;

pub const MAGIC: &[u8; 4] = b"NSIM";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 18;
pub const INDEX_ENTRY_LEN: usize = 12;

pub const ATTR_USER_ACCESS_LEVEL: u32 = 18;

const SUPPORTED_ATTRIBUTES: [u32; 8] = [
    ATTR_NODE_ID,
    ATTR_NODE_CLASS,
    ATTR_BROWSE_NAME,
    ATTR_DISPLAY_NAME,
    ATTR_VALUE,
    ATTR_DATA_TYPE,
    ATTR_ACCESS_LEVEL,
    ATTR_USER_ACCESS_LEVEL,
];

pub(crate) fn form_rank(id: &NodeId) -> u8 {
    match id.identifier {
        Identifier::Numeric(_) => 0,
        Identifier::String(_) => 1,
        Identifier::Guid(_) => 2,
        Identifier::ByteString(_) => 3,
    }
}

/// A decoded node record.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub offset: usize,
    pub len: usize,
    pub id: NodeId,
    pub class: NodeClass,
    pub browse_name: QualifiedName,
    pub display_name: String,
    pub data_type: NodeId,
    pub access: u8,
    pub builtin: u8,
    pub slot_offset: usize,
    pub slot_len: usize,
    /// (reference type, target) pairs.
    pub references: Vec<(NodeId, NodeId)>,
}

fn short_str(r: &mut Reader<'_>) -> Option<String> {
    let n = r.u16().ok()? as usize;
    String::from_utf8(r.bytes(n).ok()?.to_vec()).ok()
}

fn parse_record(bytes: &[u8], offset: usize) -> Option<Record> {
    let mut r = Reader::new(bytes.get(offset..)?);
    let id = NodeId::decode(&mut r).ok()?;
    let class = NodeClass::from_code(r.u8().ok()?)?;
    let ns = r.u16().ok()?;
    let browse = short_str(&mut r)?;
    let display_name = short_str(&mut r)?;
    let data_type = NodeId::decode(&mut r).ok()?;
    let access = r.u8().ok()?;
    let builtin = r.u8().ok()?;
    let slot_offset = r.u32().ok()? as usize;
    let slot_len = r.u16().ok()? as usize;
    let nrefs = r.u16().ok()?;
    let mut references = Vec::with_capacity(nrefs as usize);
    for _ in 0..nrefs {
        references.push((NodeId::decode(&mut r).ok()?, NodeId::decode(&mut r).ok()?));
    }
    Some(Record {
        offset,
        len: r.position(),
        id,
        class,
        browse_name: QualifiedName {
            namespace: ns,
            name: Some(browse),
        },
        display_name,
        data_type,
        access,
        builtin,
        slot_offset,
        slot_len,
        references,
    })
}

fn u16_at(b: &[u8], at: usize) -> Option<u16> {
    Some(u16::from_le_bytes(b.get(at..at + 2)?.try_into().ok()?))
}

fn u32_at(b: &[u8], at: usize) -> Option<u32> {
    Some(u32::from_le_bytes(b.get(at..at + 4)?.try_into().ok()?))
}

/// Checks an image; an empty list means it is safe to load.
pub fn verify(img: &[u8]) -> Vec<String> {
    let mut v = Vec::new();
    if img.len() < HEADER_LEN {
        v.push(format!("image shorter than the {HEADER_LEN}-byte header"));
        return v;
    }
    if &img[..4] != MAGIC {
        v.push("bad magic".into());
    }
    let version = u16_at(img, 4).unwrap_or(0);
    if version != VERSION {
        v.push(format!("unsupported version {version}"));
    }
    let count = u32_at(img, 6).unwrap_or(0) as usize;
    let index_off = u32_at(img, 10).unwrap_or(0) as usize;
    let total = u32_at(img, 14).unwrap_or(0) as usize;
    if total != img.len() {
        v.push(format!(
            "totalSize {total} but image has {} bytes",
            img.len()
        ));
    }
    if index_off != HEADER_LEN {
        v.push(format!("index offset {index_off} != {HEADER_LEN}"));
        return v;
    }
    let index_end = index_off.saturating_add(count.saturating_mul(INDEX_ENTRY_LEN));
    if index_end > img.len() {
        v.push("index out of bounds".into());
        return v;
    }
    // Namespace table follows the index.
    let mut r = Reader::new(&img[index_end..]);
    let ns_ok = (|| {
        let n = r.u16().ok()?;
        for _ in 0..n {
            short_str(&mut r)?;
        }
        Some(())
    })();
    if ns_ok.is_none() {
        v.push("namespace table out of bounds".into());
        return v;
    }
    let records_start = index_end + r.position();

    let mut prev: Option<NodeId> = None;
    let mut spans = Vec::new();
    let mut slots = Vec::new();
    for k in 0..count {
        let at = index_off + k * INDEX_ENTRY_LEN;
        let ns = u16_at(img, at).unwrap_or(0);
        let rank = img[at + 2];
        let key = u32_at(img, at + 4).unwrap_or(0);
        let off = u32_at(img, at + 8).unwrap_or(0) as usize;
        if off < records_start || off >= img.len() {
            v.push(format!("record offset out of bounds @{k}"));
            prev = None;
            continue;
        }
        let Some(rec) = parse_record(img, off) else {
            v.push(format!("record offset out of bounds @{k}"));
            prev = None;
            continue;
        };
        if rec.id.namespace != ns
            || form_rank(&rec.id) != rank
            || rec.id.as_numeric().is_some_and(|n| n != key)
            || (rec.id.as_numeric().is_none() && key as usize != off)
        {
            v.push(format!("index key does not match record @{k}"));
        }
        if prev.as_ref().is_some_and(|p| *p >= rec.id) {
            v.push(format!("index not sorted @{k}"));
        }
        spans.push((off, off + rec.len));
        if rec.class == NodeClass::Variable {
            if rec.slot_len == 0 || rec.slot_offset + rec.slot_len > img.len() {
                v.push(format!("value slot out of bounds @{k}"));
            } else {
                slots.push((rec.slot_offset, rec.slot_offset + rec.slot_len, k));
            }
        }
        prev = Some(rec.id);
    }
    spans.sort_unstable();
    let records_end = spans.iter().map(|s| s.1).max().unwrap_or(records_start);
    if spans.windows(2).any(|w| w[0].1 > w[1].0) {
        v.push("records overlap".into());
    }
    slots.sort_unstable();
    for w in slots.windows(2) {
        if w[0].1 > w[1].0 {
            v.push(format!("value slots overlap @{}", w[1].2));
        }
    }
    for &(start, _, k) in &slots {
        if start < records_end {
            v.push(format!("value slot overlaps records @{k}"));
        }
    }
    v
}

/// A verified namespace image whose value slots may be written in place.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamespaceImage {
    bytes: Vec<u8>,
    count: usize,
}

impl NamespaceImage {
    pub fn load(bytes: Vec<u8>) -> Result<Self, NsError> {
        let violations = verify(&bytes);
        if !violations.is_empty() {
            return Err(NsError::Invalid(violations));
        }
        let count = u32_at(&bytes, 6).unwrap_or(0) as usize;
        Ok(NamespaceImage { bytes, count })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn node_count(&self) -> usize {
        self.count
    }

    pub fn total_size(&self) -> usize {
        self.bytes.len()
    }

    pub fn namespaces(&self) -> Vec<String> {
        let mut r = Reader::new(&self.bytes[HEADER_LEN + self.count * INDEX_ENTRY_LEN..]);
        let n = r.u16().unwrap_or(0);
        (0..n).filter_map(|_| short_str(&mut r)).collect()
    }

    fn entry(&self, k: usize) -> (u16, u8, u32, usize) {
        let at = HEADER_LEN + k * INDEX_ENTRY_LEN;
        let b = &self.bytes;
        (
            u16_at(b, at).unwrap_or(0),
            b[at + 2],
            u32_at(b, at + 4).unwrap_or(0),
            u32_at(b, at + 8).unwrap_or(0) as usize,
        )
    }

    fn record_at(&self, offset: usize) -> Record {
        parse_record(&self.bytes, offset).expect("verified image")
    }

    fn compare_entry(&self, k: usize, id: &NodeId) -> Ordering {
        let (ns, rank, key, off) = self.entry(k);
        (ns, rank)
            .cmp(&(id.namespace, form_rank(id)))
            .then_with(|| match id.as_numeric() {
                Some(n) => key.cmp(&n),
                None => {
                    let mut r = Reader::new(&self.bytes[off..]);
                    let stored = NodeId::decode(&mut r).expect("verified image");
                    stored.identifier.cmp(&id.identifier)
                }
            })
    }

    /// Binary search over the index; returns the record and the number of entries probed.
    pub fn lookup(&self, id: &NodeId) -> (Option<Record>, u32) {
        let (mut lo, mut hi) = (0usize, self.count);
        let mut probes = 0;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            probes += 1;
            match self.compare_entry(mid, id) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return (Some(self.record_at(self.entry(mid).3)), probes),
            }
        }
        (None, probes)
    }

    /// All records in index order.
    pub fn records(&self) -> impl Iterator<Item = Record> + '_ {
        (0..self.count).map(|k| self.record_at(self.entry(k).3))
    }

    fn slot_value(&self, rec: &Record) -> Variant {
        let slot = &self.bytes[rec.slot_offset..rec.slot_offset + rec.slot_len];
        Variant::decode(&mut Reader::new(slot)).unwrap_or(Variant::Empty)
    }

    /// Reads one attribute.
    pub fn read(&self, id: &NodeId, attr: u32) -> (Result<Variant, StatusCode>, Probe) {
        let (rec, probes) = self.lookup(id);
        let mut probe = Probe {
            index_probes: probes,
            ..Probe::default()
        };
        let Some(rec) = rec else {
            return (Err(StatusCode::BAD_NODE_ID_UNKNOWN), probe);
        };
        probe.record_bytes = rec.len as u32;
        let variable = rec.class == NodeClass::Variable;
        let v = match attr {
            ATTR_NODE_ID => Variant::NodeId(rec.id.clone()),
            ATTR_NODE_CLASS => Variant::Int32(rec.class as i32),
            ATTR_BROWSE_NAME => Variant::QualifiedName(rec.browse_name.clone()),
            ATTR_DISPLAY_NAME => Variant::LocalizedText(LocalizedText {
                locale: None,
                text: Some(rec.display_name.clone()),
            }),
            ATTR_VALUE if variable => {
                probe.slot_bytes = rec.slot_len as u32;
                self.slot_value(&rec)
            }
            ATTR_DATA_TYPE if variable => Variant::NodeId(rec.data_type.clone()),
            ATTR_ACCESS_LEVEL | ATTR_USER_ACCESS_LEVEL if variable => Variant::Byte(rec.access),
            _ => return (Err(StatusCode::BAD_ATTRIBUTE_ID_INVALID), probe),
        };
        (Ok(v), probe)
    }

    /// Writes a Value attribute; only the node's value slot changes.
    pub fn write(&mut self, id: &NodeId, attr: u32, value: &Variant) -> (StatusCode, Probe) {
        let (rec, probes) = self.lookup(id);
        let mut probe = Probe {
            index_probes: probes,
            ..Probe::default()
        };
        let Some(rec) = rec else {
            return (StatusCode::BAD_NODE_ID_UNKNOWN, probe);
        };
        probe.record_bytes = rec.len as u32;
        if attr != ATTR_VALUE {
            let status = if SUPPORTED_ATTRIBUTES.contains(&attr) {
                StatusCode::BAD_NOT_WRITABLE
            } else {
                StatusCode::BAD_ATTRIBUTE_ID_INVALID
            };
            return (status, probe);
        }
        if rec.class != NodeClass::Variable || rec.access & ACCESS_WRITE == 0 {
            return (StatusCode::BAD_NOT_WRITABLE, probe);
        }
        if rec.builtin == 0 || value.type_id() != rec.builtin {
            return (StatusCode::BAD_TYPE_MISMATCH, probe);
        }
        let encoded = value.to_bytes();
        if encoded.len() > rec.slot_len {
            return (StatusCode::BAD_OUT_OF_RANGE, probe);
        }
        probe.slot_bytes = rec.slot_len as u32;
        probe.slot_write = true;
        let slot = &mut self.bytes[rec.slot_offset..rec.slot_offset + rec.slot_len];
        slot.fill(0);
        slot[..encoded.len()].copy_from_slice(&encoded);
        (StatusCode::GOOD, probe)
    }

    /// Byte ranges that writes may change.
    pub fn slot_ranges(&self) -> Vec<std::ops::Range<usize>> {
        self.records()
            .filter(|r| r.class == NodeClass::Variable)
            .map(|r| r.slot_offset..r.slot_offset + r.slot_len)
            .collect()
    }
}

impl NodeStore for NamespaceImage {
    fn read_attribute(&self, id: &NodeId, attr: u32) -> (Result<Variant, StatusCode>, Probe) {
        self.read(id, attr)
    }

    fn write_value(&mut self, id: &NodeId, attr: u32, value: &Variant) -> (StatusCode, Probe) {
        self.write(id, attr, value)
    }
}
