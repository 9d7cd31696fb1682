//! Random well-formed programs for the assembler roundtrip.

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use uaengine::asm::{assemble, canonicalize, disassemble, READ_NODE_SOURCE, WRITE_NODE_SOURCE};
use uaengine::streamvm::{Cond, Instruction, TypeTag, VmProgram};

pub type Entries = Vec<(u32, usize)>;

/// Instruction shape with a branch target given as an index into the program.
#[derive(Debug, Clone)]
pub enum Shape {
    Plain(Instruction),
    Branch(Instruction, usize),
}

fn plain() -> impl Strategy<Value = Instruction> {
    let s = 0u8..16;
    let tag = (0usize..15).prop_map(|i| TypeTag::ALL[i]);
    prop_oneof![
        Just(Instruction::Halt),
        Just(Instruction::Ret),
        any::<u8>().prop_map(Instruction::Trap),
        (s.clone(), any::<u8>()).prop_map(|(stream, imm)| Instruction::EmitU8 { stream, imm }),
        (s.clone(), any::<u16>()).prop_map(|(stream, imm)| Instruction::EmitU16 { stream, imm }),
        (s.clone(), any::<u32>()).prop_map(|(stream, imm)| Instruction::Ldi { stream, imm }),
        (tag.clone(), s.clone(), s.clone()).prop_map(|(tag, src, dst)| Instruction::Copy {
            tag,
            src,
            dst
        }),
        (tag.clone(), s.clone()).prop_map(|(tag, stream)| Instruction::Skip { tag, stream }),
        (tag, s.clone(), s.clone()).prop_map(|(tag, a, b)| Instruction::Cmp { tag, a, b }),
        (0u8..8, s).prop_map(|(reg, stream)| Instruction::MkIdx { reg, stream }),
        (0u8..8).prop_map(|reg| Instruction::Seek { reg }),
    ]
}

fn branch() -> impl Strategy<Value = Instruction> {
    prop_oneof![
        Just(Instruction::Br(0)),
        Just(Instruction::Call(0)),
        (0usize..6).prop_map(|i| Instruction::Brc {
            cond: Cond::ALL[i],
            rel: 0
        }),
        (0u8..16).prop_map(|stream| Instruction::BrcEnd { stream, rel: 0 }),
    ]
}

pub fn shapes() -> impl Strategy<Value = Vec<Shape>> {
    prop::collection::vec(
        prop_oneof![
            3 => plain().prop_map(Shape::Plain),
            1 => (branch(), any::<prop::sample::Index>()).prop_map(|(i, t)| Shape::Branch(i, t.index(usize::MAX))),
        ],
        1..120,
    )
}

/// Lays out the shapes, resolving targets to instruction boundaries.
pub fn build(shapes: &[Shape], entries: &[(u32, usize)]) -> VmProgram {
    let mut offsets = Vec::with_capacity(shapes.len());
    let mut pc = 0usize;
    for s in shapes {
        offsets.push(pc);
        pc += match s {
            Shape::Plain(i) | Shape::Branch(i, _) => i.len(),
        };
    }
    let mut code = Vec::with_capacity(pc);
    for (k, s) in shapes.iter().enumerate() {
        let ins = match s {
            Shape::Plain(i) => *i,
            Shape::Branch(i, t) => {
                let dest = offsets[t % shapes.len()] as i64;
                let next = (offsets[k] + i.len()) as i64;
                i.with_rel((dest - next) as i16)
            }
        };
        ins.encode(&mut code);
    }
    VmProgram {
        name: "random".into(),
        code,
        entry_points: entries
            .iter()
            .map(|&(svc, idx)| (svc, offsets[idx % shapes.len()] as u32))
            .collect(),
    }
}

pub fn entries() -> impl Strategy<Value = Entries> {
    prop::collection::vec((any::<u32>(), any::<usize>()), 0..4)
}

/// Disassembling then assembling gives back the program, and the listing is canonical.
pub fn check_roundtrip(shapes: &[Shape], entries: &[(u32, usize)]) -> Result<(), TestCaseError> {
    let p = build(shapes, entries);
    let listing = disassemble(&p).unwrap();
    let back = assemble("random", &listing).unwrap();
    prop_assert_eq!(&back.code, &p.code);
    prop_assert_eq!(&back.entry_points, &p.entry_points);
    prop_assert_eq!(canonicalize(&listing).unwrap(), listing);
    Ok(())
}

/// The bundled service programs roundtrip modulo canonical form.
pub fn check_bundled() -> Result<(), String> {
    for src in [READ_NODE_SOURCE, WRITE_NODE_SOURCE] {
        let p = assemble("bundled", src).map_err(|e| e.to_string())?;
        let back = disassemble(&p).map_err(|e| e.to_string())?;
        if back != canonicalize(src).map_err(|e| e.to_string())? {
            return Err("bundled listing is not canonical after roundtrip".into());
        }
        if assemble("bundled", &back).map_err(|e| e.to_string())?.code != p.code {
            return Err("bundled program changed in roundtrip".into());
        }
    }
    Ok(())
}
