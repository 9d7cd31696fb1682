//! The namespace interface as seen from stream 2.
//!
//! Commands are written to the stream and executed as soon as they are
//! complete; results are appended to the stream's readable side.
//!
//! | command | operands               | result                  |
//! |---------|------------------------|-------------------------|
//! | `01`    | nid, u32 attribute     | dv                      |
//! | `02`    | nid, u32 attribute, dv | u32 status              |
//! | `03`    | u32 ttr, i64 timestamp | none                    |

use crate::codec::{
    BinaryCodec, CodecError, DataValue, DateTime, NodeId, Reader, StatusCode, Variant,
};

pub const CMD_READ: u8 = 0x01;
pub const CMD_WRITE: u8 = 0x02;
pub const CMD_SETUP: u8 = 0x03;

pub const ATTR_NODE_ID: u32 = 1;
pub const ATTR_NODE_CLASS: u32 = 2;
pub const ATTR_BROWSE_NAME: u32 = 3;
pub const ATTR_DISPLAY_NAME: u32 = 4;
pub const ATTR_VALUE: u32 = 13;
pub const ATTR_DATA_TYPE: u32 = 14;
pub const ATTR_ACCESS_LEVEL: u32 = 17;

/// Bytes of one index entry fetched per binary-search probe.
pub const INDEX_ENTRY_BYTES: u32 = 12;

/// Memory touched by one namespace operation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Probe {
    pub index_probes: u32,
    pub record_bytes: u32,
    pub slot_bytes: u32,
    /// The slot access stores a value.
    pub slot_write: bool,
}

/// Node lookup and value-slot access behind the port.
pub trait NodeStore {
    fn read_attribute(&self, id: &NodeId, attr: u32) -> (Result<Variant, StatusCode>, Probe);
    fn write_value(&mut self, id: &NodeId, attr: u32, value: &Variant) -> (StatusCode, Probe);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortError {
    /// The bytes written so far cannot start a valid command.
    Invalid,
}

/// Timestamps to return, as in the Read service.
fn source_ts(ttr: u32) -> bool {
    ttr == 0 || ttr == 2
}

fn server_ts(ttr: u32) -> bool {
    ttr == 1 || ttr == 2
}

#[derive(Debug, Clone, Default)]
pub struct NamespacePort {
    pending: Vec<u8>,
    ttr: u32,
    timestamp: DateTime,
}

/// Outcome of feeding bytes into the port.
#[derive(Debug, Default)]
pub struct PortOutput {
    pub result: Vec<u8>,
    pub probes: Vec<Probe>,
}

impl NamespacePort {
    pub fn new() -> Self {
        NamespacePort {
            ttr: 3,
            ..NamespacePort::default()
        }
    }

    pub fn is_idle(&self) -> bool {
        self.pending.is_empty()
    }

    /// Accepts command bytes, executing every command they complete.
    pub fn write(
        &mut self,
        bytes: &[u8],
        store: &mut dyn NodeStore,
    ) -> Result<PortOutput, PortError> {
        self.pending.extend_from_slice(bytes);
        let mut out = PortOutput::default();
        loop {
            match self.try_execute(store, &mut out) {
                Ok(Some(used)) => {
                    self.pending.drain(..used);
                    if self.pending.is_empty() {
                        return Ok(out);
                    }
                }
                Ok(None) => return Ok(out),
                Err(e) => {
                    self.pending.clear();
                    return Err(e);
                }
            }
        }
    }

    fn try_execute(
        &mut self,
        store: &mut dyn NodeStore,
        out: &mut PortOutput,
    ) -> Result<Option<usize>, PortError> {
        let mut r = Reader::new(&self.pending);
        let parsed = (|| -> Result<Command, CodecError> {
            Ok(match r.u8()? {
                CMD_READ => Command::Read(NodeId::decode(&mut r)?, r.u32()?),
                CMD_WRITE => Command::Write(
                    NodeId::decode(&mut r)?,
                    r.u32()?,
                    DataValue::decode(&mut r)?,
                ),
                CMD_SETUP => Command::Setup(r.u32()?, DateTime(r.i64()?)),
                _ => return Err(r.malformed("unknown port command")),
            })
        })();
        let cmd = match parsed {
            Ok(c) => c,
            Err(CodecError::Truncated { .. }) => return Ok(None),
            Err(_) => return Err(PortError::Invalid),
        };
        let used = r.position();
        match cmd {
            Command::Setup(ttr, ts) => {
                self.ttr = ttr;
                self.timestamp = ts;
            }
            Command::Read(id, attr) => {
                let (res, probe) = store.read_attribute(&id, attr);
                out.probes.push(probe);
                let dv = match res {
                    Ok(v) if attr == ATTR_VALUE => DataValue {
                        value: Some(v),
                        source_timestamp: source_ts(self.ttr).then_some(self.timestamp),
                        server_timestamp: server_ts(self.ttr).then_some(self.timestamp),
                        ..DataValue::default()
                    },
                    Ok(v) => DataValue::value(v),
                    Err(status) => DataValue::status(status),
                };
                dv.encode(&mut out.result);
            }
            Command::Write(id, attr, dv) => {
                let (status, probe) = match dv.value {
                    Some(v) => store.write_value(&id, attr, &v),
                    None => (StatusCode::BAD_TYPE_MISMATCH, Probe::default()),
                };
                out.probes.push(probe);
                status.encode(&mut out.result);
            }
        }
        Ok(Some(used))
    }
}

enum Command {
    Read(NodeId, u32),
    Write(NodeId, u32, DataValue),
    Setup(u32, DateTime),
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use std::collections::BTreeMap;

    /// Map-backed store used by VM tests.
    #[derive(Debug, Default)]
    pub struct MapStore(pub BTreeMap<NodeId, (Variant, bool)>);

    impl NodeStore for MapStore {
        fn read_attribute(&self, id: &NodeId, attr: u32) -> (Result<Variant, StatusCode>, Probe) {
            let probe = Probe {
                index_probes: 1,
                record_bytes: 16,
                slot_bytes: 5,
                slot_write: false,
            };
            let Some((v, _)) = self.0.get(id) else {
                return (Err(StatusCode::BAD_NODE_ID_UNKNOWN), probe);
            };
            match attr {
                ATTR_VALUE => (Ok(v.clone()), probe),
                ATTR_NODE_ID => (Ok(Variant::NodeId(id.clone())), probe),
                _ => (Err(StatusCode::BAD_ATTRIBUTE_ID_INVALID), probe),
            }
        }

        fn write_value(&mut self, id: &NodeId, attr: u32, value: &Variant) -> (StatusCode, Probe) {
            let probe = Probe::default();
            match self.0.get_mut(id) {
                None => (StatusCode::BAD_NODE_ID_UNKNOWN, probe),
                Some(_) if attr != ATTR_VALUE => (StatusCode::BAD_NOT_WRITABLE, probe),
                Some((_, false)) => (StatusCode::BAD_NOT_WRITABLE, probe),
                Some((v, true)) if v.type_id() != value.type_id() => {
                    (StatusCode::BAD_TYPE_MISMATCH, probe)
                }
                Some((v, true)) => {
                    *v = value.clone();
                    (StatusCode::GOOD, probe)
                }
            }
        }
    }

    pub fn store() -> MapStore {
        let mut m = BTreeMap::new();
        m.insert(NodeId::numeric(1, 1003), (Variant::Int32(0), true));
        m.insert(NodeId::numeric(0, 2259), (Variant::Int32(0), false));
        MapStore(m)
    }

    #[test]
    fn read_in_pieces() {
        let mut s = store();
        let mut port = NamespacePort::new();
        let mut cmd = vec![CMD_SETUP];
        cmd.extend_from_slice(&2u32.to_le_bytes());
        cmd.extend_from_slice(&77i64.to_le_bytes());
        cmd.push(CMD_READ);
        NodeId::numeric(1, 1003).encode(&mut cmd);
        cmd.extend_from_slice(&ATTR_VALUE.to_le_bytes());
        let first = port.write(&cmd[..10], &mut s).unwrap();
        assert!(first.result.is_empty());
        let rest = port.write(&cmd[10..], &mut s).unwrap();
        let (dv, _) = DataValue::from_bytes(&rest.result).unwrap();
        assert_eq!(dv.value, Some(Variant::Int32(0)));
        assert_eq!(dv.source_timestamp, Some(DateTime(77)));
        assert_eq!(dv.server_timestamp, Some(DateTime(77)));
        assert!(port.is_idle());
    }

    #[test]
    fn write_and_unknown_command() {
        let mut s = store();
        let mut port = NamespacePort::new();
        let mut cmd = vec![CMD_WRITE];
        NodeId::numeric(0, 2259).encode(&mut cmd);
        cmd.extend_from_slice(&ATTR_VALUE.to_le_bytes());
        DataValue::value(Variant::Int32(1)).encode(&mut cmd);
        let out = port.write(&cmd, &mut s).unwrap();
        assert_eq!(out.result, StatusCode::BAD_NOT_WRITABLE.0.to_le_bytes());
        assert_eq!(port.write(&[0x09], &mut s).unwrap_err(), PortError::Invalid);
    }
}
