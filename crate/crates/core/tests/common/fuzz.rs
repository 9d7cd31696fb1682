//! Seeded frame fuzzer: mutated client frames go to `decode_value`, the frame
//! decoder, the stream reassembler and a live engine connection.

use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uaengine::codec::{
    decode_value, DateTime, DecodeLimits, NodeId, ServiceMessage, ValueKind, Variant,
};
use uaengine::engine::{ClientEvent, Clock, ConnId, Engine, SessionClient};
use uaengine::nsimage::acceptance_image;
use uaengine::s3::{EngineConfig, ServicePrograms};
use uaengine::transport::{Frame, FrameReader, LocalChannelIds, ServerInfo};

const KINDS: [ValueKind; 17] = [
    ValueKind::Boolean,
    ValueKind::SByte,
    ValueKind::Byte,
    ValueKind::Int16,
    ValueKind::UInt16,
    ValueKind::Int32,
    ValueKind::UInt32,
    ValueKind::Float,
    ValueKind::Double,
    ValueKind::String,
    ValueKind::DateTime,
    ValueKind::ByteString,
    ValueKind::NodeId,
    ValueKind::QualifiedName,
    ValueKind::LocalizedText,
    ValueKind::Variant,
    ValueKind::DataValue,
];

#[derive(Debug, Default)]
pub struct FuzzReport {
    pub frames: u64,
    /// Inputs `decode_value` rejected with an error.
    pub decode_errors: u64,
    /// Inputs the frame decoder rejected.
    pub frame_errors: u64,
    /// Engine replies that were ERR frames or connection closes.
    pub engine_rejects: u64,
    /// Mutated requests that still got a service response.
    pub served: u64,
    pub crashes: Vec<String>,
}

fn clock() -> Clock {
    Clock {
        now: DateTime(0),
        now_ms: 0,
    }
}

fn engine() -> Engine {
    Engine::new(
        EngineConfig {
            seed: Some(1),
            ..EngineConfig::default()
        },
        acceptance_image(),
        ServicePrograms::bundled().unwrap(),
        ServerInfo::default(),
        Box::new(LocalChannelIds::default()),
    )
    .unwrap()
}

/// Feeds `frame` and hands every reply to the client, returning the last event.
fn exchange(
    engine: &mut Engine,
    conn: ConnId,
    client: &mut SessionClient,
    frame: &[u8],
) -> Option<ClientEvent> {
    let r = engine.on_frame(conn, frame, clock());
    let mut last = None;
    for f in &r.frames {
        last = client.on_frame(f).ok();
    }
    last
}

/// A connection with an activated session.
struct Session {
    conn: ConnId,
    client: SessionClient,
}

impl Session {
    fn open(engine: &mut Engine) -> Session {
        let conn = engine.connect();
        let mut client = SessionClient::default();
        let hello = client.hello();
        exchange(engine, conn, &mut client, &hello);
        let open = client.open();
        exchange(engine, conn, &mut client, &open);
        for step in 0..2 {
            let msg = if step == 0 {
                client.create_session()
            } else {
                client.activate_session()
            };
            for f in client.request(&msg).unwrap() {
                exchange(engine, conn, &mut client, &f);
            }
        }
        Session { conn, client }
    }

    fn next_request(&mut self, rng: &mut ChaCha8Rng) -> Vec<u8> {
        let id = NodeId::numeric(1, rng.gen_range(1000..1005));
        let msg: ServiceMessage = match rng.gen_range(0..3) {
            0 => self.client.read(&[id]),
            1 => self.client.write(&id, Variant::Int32(rng.gen())),
            _ => self
                .client
                .read(&[id.clone(), NodeId::numeric(0, 2256), id]),
        };
        self.client.request(&msg).unwrap().swap_remove(0)
    }
}

fn mutate(rng: &mut ChaCha8Rng, mut f: Vec<u8>) -> Vec<u8> {
    for _ in 0..rng.gen_range(1..5) {
        match rng.gen_range(0..7) {
            0 if !f.is_empty() => {
                let i = rng.gen_range(0..f.len());
                f[i] ^= 1 << rng.gen_range(0..8);
            }
            1 if !f.is_empty() => {
                let i = rng.gen_range(0..f.len());
                f[i] = rng.gen();
            }
            2 => {
                let n = rng.gen_range(0..=f.len());
                f.truncate(n);
            }
            3 => {
                let i = rng.gen_range(0..=f.len());
                let junk: Vec<u8> = (0..rng.gen_range(1..32)).map(|_| rng.gen()).collect();
                f.splice(i..i, junk);
            }
            // Interesting integers over a length or count field.
            4 if f.len() >= 4 => {
                let i = rng.gen_range(0..=f.len() - 4);
                let v = *[
                    0u32,
                    1,
                    0x7fff_ffff,
                    0x8000_0000,
                    u32::MAX,
                    f.len() as u32,
                    8192,
                ]
                .choose(rng)
                .unwrap();
                f[i..i + 4].copy_from_slice(&v.to_le_bytes());
            }
            // Keep the size field consistent so the body gets parsed.
            5 if f.len() >= 8 => {
                let n = f.len() as u32;
                f[4..8].copy_from_slice(&n.to_le_bytes());
            }
            _ => f = (0..rng.gen_range(0..64)).map(|_| rng.gen()).collect(),
        }
    }
    f
}

fn check_decoders(report: &mut FuzzReport, rng: &mut ChaCha8Rng, f: &[u8]) {
    let from = rng.gen_range(0..=f.len());
    for kind in KINDS {
        match decode_value(&f[from..], kind, DecodeLimits::default()) {
            Ok((_, used)) if used > f.len() - from => report
                .crashes
                .push(format!("{kind:?} consumed {used} of {}", f.len() - from)),
            Ok(_) => {}
            Err(_) => report.decode_errors += 1,
        }
    }
    if Frame::decode(f).is_err() {
        report.frame_errors += 1;
    }
    let mut reader = FrameReader::new(1 << 16);
    for piece in f.chunks(rng.gen_range(1..64)) {
        reader.push(piece);
    }
    while let Ok(Some(_)) = reader.next_frame() {}
}

/// Runs `frames` mutated frames through every entry point.
pub fn run(frames: u64, seed: u64) -> FuzzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FuzzReport::default();
    let mut engine = engine();
    let mut session = Session::open(&mut engine);
    let handshake = {
        let c = SessionClient::default();
        vec![c.hello(), c.clone().open()]
    };
    for n in 0..frames {
        let base = match n % 4 {
            0 => handshake[rng.gen_range(0..2)].clone(),
            _ => session.next_request(&mut rng),
        };
        let f = mutate(&mut rng, base);
        report.frames += 1;
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            check_decoders(&mut report, &mut rng, &f);
            let conn = if n % 4 == 0 {
                engine.connect()
            } else {
                session.conn
            };
            let r = engine.on_frame(conn, &f, clock());
            for out in &r.frames {
                if Frame::decode(out).is_err() {
                    return Err(format!("malformed reply to {}", hex(&f)));
                }
            }
            if r.close || r.frames.iter().any(|o| o.starts_with(b"ERR")) {
                report.engine_rejects += 1;
            } else if r.frames.iter().any(|o| o.starts_with(b"MSG")) {
                report.served += 1;
            }
            if n % 4 == 0 {
                engine.disconnect(conn);
            } else if r.close {
                engine.disconnect(conn);
                session = Session::open(&mut engine);
            } else {
                for out in &r.frames {
                    let _ = session.client.on_frame(out);
                }
            }
            Ok(())
        }));
        match outcome {
            Ok(Ok(())) => {}
            Ok(Err(e)) => report.crashes.push(e),
            Err(_) => {
                report.crashes.push(format!("panic on {}", hex(&f)));
                engine = self::engine();
                session = Session::open(&mut engine);
            }
        }
    }
    report
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}
