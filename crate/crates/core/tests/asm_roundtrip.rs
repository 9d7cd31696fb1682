#[path = "common/programs.rs"]
mod programs;

use proptest::prelude::*;
use uaengine::asm::{assemble, disassemble, READ_NODE_SOURCE, WRITE_NODE_SOURCE};
use uaengine::streamvm::{decode_all, Instruction, VmProgram};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn assemble_after_disassemble_is_identity(shapes in programs::shapes(), entries in programs::entries()) {
        programs::check_roundtrip(&shapes, &entries)?;
    }

    #[test]
    fn raw_offsets_survive_roundtrip(rel in any::<i16>(), pad in 0usize..4) {
        let mut code = Vec::new();
        for _ in 0..pad {
            Instruction::Halt.encode(&mut code);
        }
        Instruction::Br(rel).encode(&mut code);
        let p = VmProgram { name: "raw".into(), code, ..VmProgram::default() };
        let back = assemble("raw", &disassemble(&p).unwrap()).unwrap();
        prop_assert_eq!(back.code, p.code);
    }
}

#[test]
fn bundled_sources_roundtrip_modulo_canonical_form() {
    programs::check_bundled().unwrap();
}

#[test]
fn inserting_a_prefix_changes_only_offsets() {
    for src in [READ_NODE_SOURCE, WRITE_NODE_SOURCE] {
        let base = assemble("a", src).unwrap();
        // MKIDX on an unused register has no effect on the streams.
        let shifted = assemble("b", &format!("    MKIDX x7, s15\n{src}")).unwrap();
        let a = decode_all(&base.code).unwrap();
        let b = decode_all(&shifted.code).unwrap();
        assert_eq!(a.len() + 1, b.len());
        for ((_, x), (_, y)) in a.iter().zip(&b[1..]) {
            assert_eq!(x.with_rel(0), y.with_rel(0));
        }
        for (svc, off) in &base.entry_points {
            assert_eq!(shifted.entry_points[svc], off + 2);
        }
    }
}
