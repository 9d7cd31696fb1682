#[path = "common/captures.rs"]
mod captures;

use uaengine::codec::encoding_id::{READ_REQUEST, WRITE_REQUEST};
use uaengine::engine::capture::{replay, replay_trace, Direction};
use uaengine::engine::SimConfig;

#[test]
fn recorded_sessions_replay_without_divergence() {
    for name in [captures::READ_WRITE, captures::CONNECT_ONLY] {
        let capture = captures::load(name);
        let report = replay(&capture, &mut captures::engine());
        assert!(report.passed(), "{name}: {:#?}", report.divergences);
        assert_eq!(report.connections, 1);
    }
}

#[test]
fn simulated_replay_matches_recording() {
    let capture = captures::load(captures::READ_WRITE);
    let (report, trace) =
        replay_trace(&capture, &mut captures::engine(), SimConfig::default()).unwrap();
    assert!(report.passed(), "{:#?}", report.divergences);
    let count = |svc| trace.requests.iter().filter(|r| r.service == svc).count();
    assert_eq!((count(READ_REQUEST), count(WRITE_REQUEST)), (100, 100));
    assert!(trace.within_buffer_budget());
}

#[test]
fn workload_shape() {
    let capture = captures::load(captures::READ_WRITE);
    let inbound = capture
        .events
        .iter()
        .filter(|e| e.direction == Direction::In)
        .count();
    // HEL, OPN, GetEndpoints, CreateSession, ActivateSession, 200 requests, CloseSession, CLO.
    assert!(inbound >= 205, "{inbound}");
}

#[test]
fn a_changed_reply_is_reported() {
    let mut capture = captures::load(captures::CONNECT_ONLY);
    let out = capture
        .events
        .iter_mut()
        .rev()
        .find(|e| e.direction == Direction::Out && e.bytes.starts_with(b"MSG"))
        .unwrap();
    // Flip the last byte of the body, which no mask covers.
    let last = out.bytes.len() - 1;
    out.bytes[last] ^= 0xff;
    let report = replay(&capture, &mut captures::engine());
    assert_eq!(report.divergences.len(), 1);
}
