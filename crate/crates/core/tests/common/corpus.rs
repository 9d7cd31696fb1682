//! Encodings produced by an independent OPC UA stack
//! (tools/oracle/codec_corpus.py) and the byte-exact checks against them.

use serde_json::Value as Json;
use uaengine::codec::*;

const CORPUS: &str = include_str!("../data/codec_corpus.json");

fn str_field(v: &Json) -> UaString {
    v.as_str().map(String::from)
}

fn bytes_field(v: &Json) -> ByteString {
    v.as_str().map(|h| hex::decode(h).unwrap())
}

fn node_id(v: &Json) -> NodeId {
    let ns = v["ns"].as_u64().unwrap() as u16;
    let identifier = if let Some(i) = v.get("i") {
        Identifier::Numeric(i.as_u64().unwrap() as u32)
    } else if let Some(s) = v.get("s") {
        Identifier::String(s.as_str().unwrap().into())
    } else if let Some(g) = v.get("g") {
        Identifier::Guid(Guid(
            hex::decode(g.as_str().unwrap())
                .unwrap()
                .try_into()
                .unwrap(),
        ))
    } else {
        Identifier::ByteString(hex::decode(v["b"].as_str().unwrap()).unwrap())
    };
    NodeId {
        namespace: ns,
        identifier,
    }
}

fn scalar(kind: &str, v: &Json) -> Variant {
    let int = || v.as_i64().unwrap();
    match kind {
        "Boolean" => Variant::Boolean(v.as_bool().unwrap()),
        "SByte" => Variant::SByte(int() as i8),
        "Byte" => Variant::Byte(int() as u8),
        "Int16" => Variant::Int16(int() as i16),
        "UInt16" => Variant::UInt16(int() as u16),
        "Int32" => Variant::Int32(int() as i32),
        "UInt32" => Variant::UInt32(int() as u32),
        "Float" => Variant::Float(f32::from_bits(int() as u32)),
        "Double" => Variant::Double(f64::from_bits(v.as_u64().unwrap())),
        "String" => Variant::String(str_field(v)),
        "DateTime" => Variant::DateTime(DateTime(int())),
        "ByteString" => Variant::ByteString(bytes_field(v)),
        "NodeId" => Variant::NodeId(node_id(v)),
        "QualifiedName" => Variant::QualifiedName(QualifiedName {
            namespace: v["ns"].as_u64().unwrap() as u16,
            name: str_field(&v["name"]),
        }),
        "LocalizedText" => Variant::LocalizedText(LocalizedText {
            locale: str_field(&v["locale"]),
            text: str_field(&v["text"]),
        }),
        other => panic!("unknown scalar kind {other}"),
    }
}

fn kind(name: &str) -> ValueKind {
    match name {
        "Boolean" => ValueKind::Boolean,
        "SByte" => ValueKind::SByte,
        "Byte" => ValueKind::Byte,
        "Int16" => ValueKind::Int16,
        "UInt16" => ValueKind::UInt16,
        "Int32" => ValueKind::Int32,
        "UInt32" => ValueKind::UInt32,
        "Float" => ValueKind::Float,
        "Double" => ValueKind::Double,
        "String" => ValueKind::String,
        "DateTime" => ValueKind::DateTime,
        "ByteString" => ValueKind::ByteString,
        "NodeId" => ValueKind::NodeId,
        "QualifiedName" => ValueKind::QualifiedName,
        "LocalizedText" => ValueKind::LocalizedText,
        "Variant" => ValueKind::Variant,
        "DataValue" => ValueKind::DataValue,
        other => panic!("unknown kind {other}"),
    }
}

fn variant(v: &Json) -> Variant {
    match v["t"].as_str().unwrap() {
        "Empty" => Variant::Empty,
        t => scalar(t, &v["v"]),
    }
}

fn data_value(v: &Json) -> DataValue {
    let opt_i64 = |k: &str| v[k].as_i64();
    DataValue {
        value: (!v["value"].is_null()).then(|| variant(&v["value"])),
        status: v["status"].as_u64().map(|s| StatusCode(s as u32)),
        source_timestamp: opt_i64("source_timestamp").map(DateTime),
        source_picoseconds: v["source_picoseconds"].as_u64().map(|p| p as u16),
        server_timestamp: opt_i64("server_timestamp").map(DateTime),
        server_picoseconds: v["server_picoseconds"].as_u64().map(|p| p as u16),
    }
}

fn sorted(b: &[u8]) -> Vec<u8> {
    let mut v = b.to_vec();
    v.sort_unstable();
    v
}

pub fn entries() -> Vec<Json> {
    let doc: Json = serde_json::from_str(CORPUS).unwrap();
    doc["entries"].as_array().unwrap().clone()
}

/// Encodes every value entry and decodes the reference bytes back.
/// Returns the number checked and a line per mismatch.
pub fn value_failures() -> (usize, Vec<String>) {
    let mut failures = Vec::new();
    let mut checked = 0;
    for (n, e) in entries().iter().enumerate() {
        let k = e["kind"].as_str().unwrap();
        if k == "message" {
            continue;
        }
        checked += 1;
        let reference = hex::decode(e["hex"].as_str().unwrap()).unwrap();
        let expected = match e.get("quirk") {
            // The reference stack writes ServerTimestamp before
            // SourcePicoseconds; compare against the standard layout and
            // check that only those fields moved.
            Some(q) => {
                let standard = hex::decode(e["standard_hex"].as_str().unwrap()).unwrap();
                if q != "datavalue-field-order" || sorted(&standard) != sorted(&reference) {
                    failures.push(format!("#{n}: quirk {q} is not a field permutation"));
                    continue;
                }
                standard
            }
            None => reference,
        };
        let value = match k {
            "Variant" => Value::Variant(variant(&e["value"])),
            "DataValue" => Value::DataValue(data_value(&e["value"])),
            s => Value::Scalar(scalar(s, &e["value"])),
        };
        let ours = encode_value(&value);
        if ours != expected {
            failures.push(format!(
                "#{n} {k} {}: encode {} want {}",
                e["value"],
                hex::encode(&ours),
                hex::encode(&expected)
            ));
            continue;
        }
        match decode_value(&expected, kind(k), DecodeLimits::default()) {
            Ok((back, used)) => {
                if used != expected.len() || encode_value(&back) != expected {
                    failures.push(format!(
                        "#{n} {k}: decode consumed {used} of {}",
                        expected.len()
                    ));
                }
            }
            Err(err) => failures.push(format!("#{n} {k}: decode failed: {err}")),
        }
    }
    (checked, failures)
}

fn count(n: usize, want: &Json) -> bool {
    want.as_u64() == Some(n as u64)
}

/// Decodes and re-encodes every service message entry.
pub fn message_failures() -> (usize, Vec<String>) {
    let mut failures = Vec::new();
    let mut checked = 0;
    for e in entries().iter().filter(|e| e["kind"] == "message") {
        checked += 1;
        let v = &e["value"];
        let name = v["type"].as_str().unwrap();
        let expected = hex::decode(e["hex"].as_str().unwrap()).unwrap();
        let msg = match ServiceMessage::decode(&expected) {
            Ok(m) => m,
            Err(err) => {
                failures.push(format!("{name}: {err}"));
                continue;
            }
        };
        let mut problems = Vec::new();
        if !format!("{msg:?}").starts_with(name) {
            problems.push("wrong type".to_string());
        }
        if msg.encode() != expected {
            problems.push(format!("re-encoded as {}", hex::encode(msg.encode())));
        }
        let handle = msg
            .request_header()
            .map(|h| h.request_handle)
            .or(msg.response_header().map(|h| h.request_handle));
        if handle.map(u64::from) != v["handle"].as_u64() {
            problems.push(format!("handle {handle:?}"));
        }
        if let Some(status) = v.get("status") {
            let got = msg.response_header().map(|h| h.service_result.0 as u64);
            if got != status.as_u64() {
                problems.push(format!("status {got:?}"));
            }
        }
        let counted = match (&msg, v.get("nodes"), v.get("results")) {
            (ServiceMessage::ReadRequest(r), Some(n), _) => count(r.nodes_to_read.len(), n),
            (ServiceMessage::WriteRequest(r), Some(n), _) => count(r.nodes_to_write.len(), n),
            (ServiceMessage::ReadResponse(r), _, Some(n)) => count(r.results.len(), n),
            (ServiceMessage::WriteResponse(r), _, Some(n)) => count(r.results.len(), n),
            _ => true,
        };
        if !counted {
            problems.push("element count".into());
        }
        if !problems.is_empty() {
            failures.push(format!("{name}: {}", problems.join(", ")));
        }
    }
    (checked, failures)
}
