//! Assembly language for the stream VM.
//!
//! ```text
//! .entry 631 read        ; service type id -> label
//! read:
//!     COPY.i32 s0, s1
//!     BRC end, s0, done
//!     BR read
//! done:
//!     HALT
//! ```
//!
//! Branch operands are labels or raw displacements (`@+4`, `@-3`).

mod assembler;

use crate::streamvm::{isa, ImageError, VmProgram};

pub use assembler::{
    assemble, canonicalize, disassemble, AsmError, AsmErrorKind, AsmErrors, DisasmError,
};

pub const READ_NODE_SOURCE: &str = include_str!("../../programs/read_node.s");
pub const WRITE_NODE_SOURCE: &str = include_str!("../../programs/write_node.s");

const READ_NODE_IMAGE: &[u8] = include_bytes!(concat!(env!("OUT_DIR"), "/read_node.uavm"));
const WRITE_NODE_IMAGE: &[u8] = include_bytes!(concat!(env!("OUT_DIR"), "/write_node.uavm"));

/// The service programs assembled at build time.
pub fn bundled_programs() -> Result<Vec<VmProgram>, ImageError> {
    Ok(vec![
        VmProgram::from_image("read_node", READ_NODE_IMAGE)?,
        VmProgram::from_image("write_node", WRITE_NODE_IMAGE)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halt_is_one_byte() {
        let p = assemble("t", "HALT").unwrap();
        assert_eq!(p.code, [0x00]);
        assert_eq!(disassemble(&p).unwrap(), "    HALT\n");
    }

    #[test]
    fn undefined_label_reports_line() {
        let e = assemble("t", "HALT\n  BR nowhere\n").unwrap_err();
        assert_eq!(
            e.0,
            [AsmError {
                line: 2,
                kind: AsmErrorKind::UndefinedLabel("nowhere".into())
            }]
        );
    }

    #[test]
    fn error_kinds() {
        let kind = |src: &str| assemble("t", src).unwrap_err().0[0].kind.clone();
        assert!(matches!(
            kind("a:\na: HALT"),
            AsmErrorKind::DuplicateLabel(_)
        ));
        assert!(matches!(
            kind("COPY.i32 s16, s1"),
            AsmErrorKind::OperandOutOfRange(_)
        ));
        assert!(matches!(kind("FROB s1"), AsmErrorKind::UnknownMnemonic(_)));
        assert!(matches!(
            kind("COPY.i64 s0, s1"),
            AsmErrorKind::UnknownMnemonic(_)
        ));
        assert!(matches!(
            kind("EMIT.u8 s1, 256"),
            AsmErrorKind::OperandOutOfRange(_)
        ));
        assert!(matches!(
            kind("MKIDX x8, s0"),
            AsmErrorKind::OperandOutOfRange(_)
        ));
        assert!(matches!(
            kind(".entry 631 missing\nHALT"),
            AsmErrorKind::UndefinedLabel(_)
        ));
    }

    #[test]
    fn far_branch_out_of_range() {
        let mut src = String::from("BR end\n");
        for _ in 0..11_000 {
            src.push_str("LDI s4, 0\n");
        }
        src.push_str("end: HALT\n");
        let e = assemble("t", &src).unwrap_err();
        assert_eq!(e.0[0].line, 1);
        assert!(matches!(e.0[0].kind, AsmErrorKind::OperandOutOfRange(_)));
    }

    #[test]
    fn branch_offsets_are_relative_to_next_instruction() {
        let p = assemble("t", "top: HALT\nBR top\nBRC end, s0, top").unwrap();
        assert_eq!(p.code, [0x00, 0x03, 0xFC, 0xFF, 0x50, 0xF9, 0xFF]);
    }

    #[test]
    fn illegal_opcode_offset() {
        let p = VmProgram {
            code: vec![0xFF],
            ..VmProgram::default()
        };
        assert_eq!(
            disassemble(&p),
            Err(DisasmError::Illegal(isa::IllegalOpcode {
                offset: 0,
                byte: 0xFF
            }))
        );
    }

    #[test]
    fn bundled_images_match_sources() {
        let programs = bundled_programs().unwrap();
        assert_eq!(
            programs[0],
            assemble("read_node", READ_NODE_SOURCE).unwrap()
        );
        assert_eq!(
            programs[1],
            assemble("write_node", WRITE_NODE_SOURCE).unwrap()
        );
        assert!(programs[0].entry_points.contains_key(&631));
        assert!(programs[1].entry_points.contains_key(&673));
    }

    #[test]
    fn bundled_roundtrip() {
        for src in [READ_NODE_SOURCE, WRITE_NODE_SOURCE] {
            let p = assemble("p", src).unwrap();
            let listing = disassemble(&p).unwrap();
            assert_eq!(listing, canonicalize(src).unwrap());
            assert_eq!(assemble("p", &listing).unwrap().code, p.code);
        }
    }

    mod services {
        use super::*;
        use crate::codec::*;
        use crate::streamvm::port::tests::store;
        use crate::streamvm::{run_service, Outcome};

        fn header() -> RequestHeader {
            RequestHeader {
                authentication_token: NodeId::numeric(0, 5),
                request_handle: 42,
                audit_entry_id: None,
                ..RequestHeader::default()
            }
        }

        fn run(service: u32, msg: ServiceMessage) -> ServiceMessage {
            let programs = bundled_programs().unwrap();
            let program = programs
                .iter()
                .find(|p| p.entry_points.contains_key(&service))
                .unwrap();
            let body = msg.encode()[4..].to_vec();
            let ts = 132_000_000_000_000_000i64.to_le_bytes().to_vec();
            let r = run_service(program, service, body, 4096, ts, &mut store(), 1_000_000).unwrap();
            assert_eq!(r.outcome, Outcome::Halted);
            ServiceMessage::decode(&r.response).unwrap()
        }

        fn read(nodes: Vec<ReadValueId>, max_age: f64, ttr: u32) -> ServiceMessage {
            run(
                631,
                ReadRequest {
                    request_header: header(),
                    max_age,
                    timestamps_to_return: ttr,
                    nodes_to_read: nodes,
                }
                .into(),
            )
        }

        fn rv(id: u32, attr: u32) -> ReadValueId {
            ReadValueId {
                node_id: NodeId::numeric(1, id),
                attribute_id: attr,
                ..ReadValueId::default()
            }
        }

        #[test]
        fn read_value_with_timestamps() {
            let ServiceMessage::ReadResponse(resp) = read(vec![rv(1003, 13), rv(9, 13)], 0.0, 2)
            else {
                panic!("not a read response")
            };
            assert_eq!(resp.response_header.request_handle, 42);
            assert_eq!(
                resp.response_header.timestamp,
                DateTime(132_000_000_000_000_000)
            );
            assert_eq!(resp.results.len(), 2);
            assert_eq!(resp.results[0].value, Some(Variant::Int32(0)));
            assert!(resp.results[0].source_timestamp.is_some());
            assert!(resp.results[0].server_timestamp.is_some());
            assert_eq!(
                resp.results[1].status,
                Some(StatusCode::BAD_NODE_ID_UNKNOWN)
            );
        }

        #[test]
        fn read_faults() {
            let fault = |m: ServiceMessage| match m {
                ServiceMessage::ServiceFault(f) => f.response_header.service_result,
                other => panic!("expected fault, got {}", other.name()),
            };
            assert_eq!(
                fault(read(vec![rv(1003, 13)], -1.0, 0)),
                StatusCode::BAD_MAX_AGE_INVALID
            );
            assert_eq!(
                fault(read(vec![rv(1003, 13)], 0.0, 4)),
                StatusCode::BAD_TIMESTAMPS_TO_RETURN_INVALID
            );
            assert_eq!(fault(read(vec![], 0.0, 0)), StatusCode::BAD_NOTHING_TO_DO);
        }

        #[test]
        fn read_with_index_range() {
            let mut item = rv(1003, 13);
            item.index_range = Some("1".into());
            let ServiceMessage::ReadResponse(resp) = read(vec![item, rv(1003, 13)], 0.0, 3) else {
                panic!("not a read response")
            };
            assert_eq!(
                resp.results[0].status,
                Some(StatusCode::BAD_INDEX_RANGE_NO_DATA)
            );
            assert_eq!(resp.results[1].value, Some(Variant::Int32(0)));
            assert_eq!(resp.results[1].source_timestamp, None);
        }

        #[test]
        fn write_then_statuses() {
            let wv = |id, attr, value| WriteValue {
                node_id: NodeId::numeric(1, id),
                attribute_id: attr,
                index_range: None,
                value: DataValue::value(value),
            };
            let m = run(
                673,
                WriteRequest {
                    request_header: header(),
                    nodes_to_write: vec![
                        wv(1003, 13, Variant::Int32(7)),
                        wv(1003, 13, Variant::Double(1.0)),
                        wv(2259, 13, Variant::Int32(1)),
                    ],
                }
                .into(),
            );
            let ServiceMessage::WriteResponse(resp) = m else {
                panic!("not a write response")
            };
            assert_eq!(resp.response_header.request_handle, 42);
            assert_eq!(resp.results[0], StatusCode::GOOD);
            assert!(resp.results[1].is_bad());
            assert!(resp.results[2].is_bad());
        }
    }
}
