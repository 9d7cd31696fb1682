//! Recorded conversations and their replay against the engine.
//!
//! A capture is a directory holding `manifest.txt` and one file per frame.
//! Each manifest line is `<direction> <byte count> <frame file> <connection>`,
//! where direction is `in`, `out` or `close`. Close lines use `-` for the
//! file and 0 for the byte count. Blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::codec::{mask_volatile_fields, Acknowledge, DateTime, ErrorMessage, ServiceMessage};
use crate::transport::{ChunkFlag, Frame, MessageType};

use super::driver::{Next, ReplayDriver};
use super::host::{Clock, ConnId, Engine};
use super::sim::{run_trace, CycleTrace, SimConfig, SimError};

pub const MANIFEST: &str = "manifest.txt";

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("capture malformed at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CaptureError + '_ {
    move |source| CaptureError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    In,
    Out,
    Close,
}

impl Direction {
    fn tag(self) -> &'static str {
        match self {
            Direction::In => "in",
            Direction::Out => "out",
            Direction::Close => "close",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureEvent {
    pub conn: u32,
    pub direction: Direction,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Capture {
    pub events: Vec<CaptureEvent>,
}

impl Capture {
    pub fn push(&mut self, conn: u32, direction: Direction, bytes: &[u8]) {
        self.events.push(CaptureEvent {
            conn,
            direction,
            bytes: bytes.to_vec(),
        });
    }

    pub fn load(dir: &Path) -> Result<Capture, CaptureError> {
        let manifest = dir.join(MANIFEST);
        let text = fs::read_to_string(&manifest).map_err(io_err(&manifest))?;
        let mut events = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let bad = |reason: &str| CaptureError::Malformed {
                line,
                reason: reason.into(),
            };
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = l.split_whitespace().collect();
            let [dir_tag, count, file, conn] = f[..] else {
                return Err(bad("expected 4 fields"));
            };
            let direction = match dir_tag {
                "in" => Direction::In,
                "out" => Direction::Out,
                "close" => Direction::Close,
                _ => return Err(bad("direction must be in, out or close")),
            };
            let count: usize = count.parse().map_err(|_| bad("bad byte count"))?;
            let conn: u32 = conn.parse().map_err(|_| bad("bad connection number"))?;
            let bytes = if direction == Direction::Close {
                Vec::new()
            } else {
                if file.contains("..") || Path::new(file).is_absolute() {
                    return Err(bad("frame file must be inside the capture"));
                }
                let path = dir.join(file);
                let b = fs::read(&path).map_err(io_err(&path))?;
                if b.len() != count {
                    return Err(bad(&format!(
                        "{file} has {} bytes, manifest says {count}",
                        b.len()
                    )));
                }
                b
            };
            events.push(CaptureEvent {
                conn,
                direction,
                bytes,
            });
        }
        Ok(Capture { events })
    }

    pub fn save(&self, dir: &Path) -> Result<(), CaptureError> {
        let mut w = CaptureWriter::create(dir)?;
        for e in &self.events {
            w.append(e.conn, e.direction, &e.bytes)?;
        }
        Ok(())
    }

    /// Client-side events, for driving a simulation.
    pub fn inbound(&self) -> Vec<Next> {
        self.events
            .iter()
            .filter_map(|e| match e.direction {
                Direction::In => Some(Next::Frame(e.conn, e.bytes.clone())),
                Direction::Close => Some(Next::Close(e.conn)),
                Direction::Out => None,
            })
            .collect()
    }

    pub fn outbound(&self, conn: u32) -> Vec<&[u8]> {
        self.events
            .iter()
            .filter(|e| e.conn == conn && e.direction == Direction::Out)
            .map(|e| e.bytes.as_slice())
            .collect()
    }

    pub fn connections(&self) -> Vec<u32> {
        let mut c: Vec<u32> = self.events.iter().map(|e| e.conn).collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}

/// One server-to-client message with volatile fields masked.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Exchange {
    Acknowledge(Acknowledge),
    Error(ErrorMessage),
    Message {
        message_type: &'static str,
        chunks: usize,
        body: ServiceMessage,
    },
    Aborted,
    Undecodable(String),
}

/// Groups outbound frames into messages and masks them.
pub fn exchanges<'a>(frames: impl IntoIterator<Item = &'a [u8]>) -> Vec<Exchange> {
    let mut out = Vec::new();
    let mut body = Vec::new();
    let mut chunks = 0;
    for f in frames {
        match Frame::decode(f) {
            Ok(Frame::Acknowledge(a)) => out.push(Exchange::Acknowledge(a)),
            Ok(Frame::Error(e)) => out.push(Exchange::Error(e)),
            Ok(Frame::Hello(_)) => out.push(Exchange::Undecodable("HEL from server".into())),
            Ok(Frame::Chunk(c)) => {
                chunks += 1;
                match c.flag {
                    ChunkFlag::Abort => {
                        body.clear();
                        chunks = 0;
                        out.push(Exchange::Aborted);
                    }
                    ChunkFlag::Intermediate => body.extend_from_slice(&c.body),
                    ChunkFlag::Final => {
                        body.extend_from_slice(&c.body);
                        let message_type = match c.message_type {
                            MessageType::Opn => "OPN",
                            MessageType::Clo => "CLO",
                            _ => "MSG",
                        };
                        out.push(match ServiceMessage::decode(&body) {
                            Ok(m) => Exchange::Message {
                                message_type,
                                chunks,
                                body: mask_volatile_fields(m),
                            },
                            Err(e) => Exchange::Undecodable(e.to_string()),
                        });
                        body.clear();
                        chunks = 0;
                    }
                }
            }
            Err(e) => out.push(Exchange::Undecodable(e.to_string())),
        }
    }
    out
}

/// First difference between a recorded and a replayed exchange.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Divergence {
    pub conn: u32,
    /// Position of the exchange on its connection.
    pub exchange: usize,
    pub field: String,
    pub expected: String,
    pub actual: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "conn={} exchange={} field={} expected={} actual={}",
            self.conn, self.exchange, self.field, self.expected, self.actual
        )
    }
}

fn first_diff(path: &str, a: &Value, b: &Value) -> Option<(String, String, String)> {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            for (k, va) in x {
                let p = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                match y.get(k) {
                    Some(vb) => {
                        if let Some(d) = first_diff(&p, va, vb) {
                            return Some(d);
                        }
                    }
                    None => return Some((p, va.to_string(), "missing".into())),
                }
            }
            y.keys()
                .find(|k| !x.contains_key(*k))
                .map(|k| (format!("{path}.{k}"), "missing".into(), y[k].to_string()))
        }
        (Value::Array(x), Value::Array(y)) => {
            for (i, (va, vb)) in x.iter().zip(y).enumerate() {
                if let Some(d) = first_diff(&format!("{path}[{i}]"), va, vb) {
                    return Some(d);
                }
            }
            (x.len() != y.len()).then(|| {
                (
                    format!("{path}.len"),
                    x.len().to_string(),
                    y.len().to_string(),
                )
            })
        }
        _ => (a != b).then(|| (path.to_string(), a.to_string(), b.to_string())),
    }
}

/// Field-wise comparison of two exchange lists on one connection.
pub fn compare(conn: u32, expected: &[Exchange], actual: &[Exchange]) -> Option<Divergence> {
    let to_json = |e: &Exchange| serde_json::to_value(e).unwrap_or(Value::Null);
    for (i, (e, a)) in expected.iter().zip(actual).enumerate() {
        if let Some((field, expected, actual)) = first_diff("", &to_json(e), &to_json(a)) {
            return Some(Divergence {
                conn,
                exchange: i,
                field,
                expected,
                actual,
            });
        }
    }
    (expected.len() != actual.len()).then(|| Divergence {
        conn,
        exchange: expected.len().min(actual.len()),
        field: "exchange count".into(),
        expected: expected.len().to_string(),
        actual: actual.len().to_string(),
    })
}

/// Appends events to a capture directory as they happen.
#[derive(Debug)]
pub struct CaptureWriter {
    dir: PathBuf,
    manifest: fs::File,
    next: usize,
}

impl CaptureWriter {
    /// Creates the directory and an empty manifest, replacing any old one.
    pub fn create(dir: &Path) -> Result<Self, CaptureError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(MANIFEST);
        let mut manifest = fs::File::create(&path).map_err(io_err(&path))?;
        writeln!(manifest, "# direction bytes file connection").map_err(io_err(&path))?;
        Ok(CaptureWriter {
            dir: dir.to_path_buf(),
            manifest,
            next: 0,
        })
    }

    pub fn append(
        &mut self,
        conn: u32,
        direction: Direction,
        bytes: &[u8],
    ) -> Result<(), CaptureError> {
        let k = self.next;
        self.next += 1;
        let line = if direction == Direction::Close {
            format!("close 0 - {conn}")
        } else {
            let name = format!("{k:05}-{}.bin", direction.tag());
            let path = self.dir.join(&name);
            fs::write(&path, bytes).map_err(io_err(&path))?;
            format!("{} {} {name} {conn}", direction.tag(), bytes.len())
        };
        let path = self.dir.join(MANIFEST);
        writeln!(self.manifest, "{line}")
            .and_then(|_| self.manifest.flush())
            .map_err(io_err(&path))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub connections: usize,
    pub exchanges: usize,
    pub divergences: Vec<Divergence>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.divergences.is_empty()
    }
}

/// Feeds the recorded client frames to `engine` and compares its replies.
pub fn replay(capture: &Capture, engine: &mut Engine) -> ReplayReport {
    let mut ids: BTreeMap<u32, ConnId> = BTreeMap::new();
    let mut produced: BTreeMap<u32, Vec<Vec<u8>>> = BTreeMap::new();
    let base = DateTime::now();
    for (k, e) in capture.events.iter().enumerate() {
        match e.direction {
            Direction::In => {
                let id = *ids.entry(e.conn).or_insert_with(|| engine.connect());
                let clock = Clock {
                    now: DateTime(base.0 + k as i64),
                    now_ms: 0,
                };
                let r = engine.on_frame(id, &e.bytes, clock);
                produced.entry(e.conn).or_default().extend(r.frames);
                if r.close {
                    ids.remove(&e.conn);
                }
            }
            Direction::Close => {
                if let Some(id) = ids.remove(&e.conn) {
                    engine.disconnect(id);
                }
            }
            Direction::Out => {}
        }
    }
    for id in ids.into_values() {
        engine.disconnect(id);
    }
    report(capture, &produced)
}

/// Replays the recorded client frames through the timing model and compares
/// the replies.
pub fn replay_trace(
    capture: &Capture,
    engine: &mut Engine,
    cfg: SimConfig,
) -> Result<(ReplayReport, CycleTrace), SimError> {
    let mut driver = ReplayDriver::new(capture.inbound());
    let trace = run_trace(engine, &mut driver, cfg)?;
    let mut produced: BTreeMap<u32, Vec<Vec<u8>>> = BTreeMap::new();
    for (conn, f) in &trace.responses {
        produced.entry(*conn).or_default().push(f.clone());
    }
    Ok((report(capture, &produced), trace))
}

fn report(capture: &Capture, produced: &BTreeMap<u32, Vec<Vec<u8>>>) -> ReplayReport {
    let mut report = ReplayReport {
        connections: 0,
        exchanges: 0,
        divergences: Vec::new(),
    };
    for conn in capture.connections() {
        report.connections += 1;
        let expected = exchanges(capture.outbound(conn));
        let actual = exchanges(
            produced
                .get(&conn)
                .map(|v| v.iter().map(Vec::as_slice).collect::<Vec<_>>())
                .unwrap_or_default(),
        );
        report.exchanges += expected.len();
        if let Some(d) = compare(conn, &expected, &actual) {
            report.divergences.push(d);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn diff_names_the_field() {
        let a = json!({"x": {"y": [1, 2]}, "z": 1});
        let b = json!({"x": {"y": [1, 3]}, "z": 1});
        assert_eq!(
            first_diff("", &a, &b),
            Some(("x.y[1]".into(), "2".into(), "3".into()))
        );
        assert_eq!(first_diff("", &a, &a), None);
    }

    #[test]
    fn manifest_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Capture::default();
        c.push(0, Direction::In, b"HELF\x08\x00\x00\x00");
        c.push(0, Direction::Out, b"abc");
        c.push(0, Direction::Close, b"");
        c.save(dir.path()).unwrap();
        assert_eq!(Capture::load(dir.path()).unwrap(), c);
    }

    #[test]
    fn malformed_manifest() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(MANIFEST), "in 3 a.bin\n").unwrap();
        assert!(matches!(
            Capture::load(dir.path()),
            Err(CaptureError::Malformed { line: 1, .. })
        ));
        fs::write(dir.path().join("a.bin"), b"ab").unwrap();
        fs::write(dir.path().join(MANIFEST), "# c\nin 3 a.bin 0\n").unwrap();
        assert!(matches!(
            Capture::load(dir.path()),
            Err(CaptureError::Malformed { line: 2, .. })
        ));
        fs::write(dir.path().join(MANIFEST), "in 2 ../a.bin 0\n").unwrap();
        assert!(Capture::load(dir.path()).is_err());
    }
}
