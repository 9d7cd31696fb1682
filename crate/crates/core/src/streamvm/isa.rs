//! Instruction encoding.
//!
//! | first byte | instruction        | len | operands                     |
//! |------------|--------------------|-----|------------------------------|
//! | `00`       | HALT               | 1   |                              |
//! | `01`       | RET                | 1   |                              |
//! | `02`       | TRAP code          | 2   | code                         |
//! | `03`       | BR rel             | 3   | i16                          |
//! | `04`       | CALL rel           | 3   | i16                          |
//! | `05`       | EMIT.u8 s, imm     | 3   | `s<<4`, imm8                 |
//! | `06`       | EMIT.u16 s, imm    | 4   | `s<<4`, imm16                |
//! | `07`       | LDI s, imm         | 6   | `s<<4`, imm32                |
//! | `1T`       | COPY.T src, dst    | 2   | `src<<4 \| dst`              |
//! | `2T`       | SKIP.T s           | 2   | `s<<4`                       |
//! | `3T`       | CMP.T a, b         | 2   | `a<<4 \| b`                  |
//! | `40`..`45` | BRC cond, rel      | 3   | i16                          |
//! | `5s`       | BRC end, s, rel    | 3   | i16                          |
//! | `6r`       | MKIDX xr, s        | 2   | `s<<4`, r < 8                |
//! | `7r`       | SEEK xr            | 1   | r < 8                        |
//!
//! Branch offsets are relative to the address of the next instruction.
//! Every other first byte, type tag 15 and any nonzero reserved nibble is illegal.

use std::fmt;

pub const STREAM_COUNT: usize = 16;
pub const INDEX_REGISTERS: usize = 8;

/// Operand type of COPY, SKIP and CMP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TypeTag {
    Bool,
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
    Str,
    Nid,
    Lt,
    Qn,
    Var,
    Dv,
}

impl TypeTag {
    pub const ALL: [TypeTag; 15] = [
        TypeTag::Bool,
        TypeTag::I8,
        TypeTag::U8,
        TypeTag::I16,
        TypeTag::U16,
        TypeTag::I32,
        TypeTag::U32,
        TypeTag::F32,
        TypeTag::F64,
        TypeTag::Str,
        TypeTag::Nid,
        TypeTag::Lt,
        TypeTag::Qn,
        TypeTag::Var,
        TypeTag::Dv,
    ];

    pub fn nibble(self) -> u8 {
        self as u8
    }

    pub fn from_nibble(n: u8) -> Option<Self> {
        Self::ALL.get(n as usize).copied()
    }

    pub fn suffix(self) -> &'static str {
        match self {
            TypeTag::Bool => "bool",
            TypeTag::I8 => "i8",
            TypeTag::U8 => "u8",
            TypeTag::I16 => "i16",
            TypeTag::U16 => "u16",
            TypeTag::I32 => "i32",
            TypeTag::U32 => "u32",
            TypeTag::F32 => "f32",
            TypeTag::F64 => "f64",
            TypeTag::Str => "str",
            TypeTag::Nid => "nid",
            TypeTag::Lt => "lt",
            TypeTag::Qn => "qn",
            TypeTag::Var => "var",
            TypeTag::Dv => "dv",
        }
    }

    pub fn from_suffix(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|t| t.suffix() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cond {
    Eq,
    Ne,
    Lt,
    Ge,
    Gt,
    Le,
}

impl Cond {
    pub const ALL: [Cond; 6] = [Cond::Eq, Cond::Ne, Cond::Lt, Cond::Ge, Cond::Gt, Cond::Le];

    pub fn name(self) -> &'static str {
        match self {
            Cond::Eq => "eq",
            Cond::Ne => "ne",
            Cond::Lt => "lt",
            Cond::Ge => "ge",
            Cond::Gt => "gt",
            Cond::Le => "le",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.name() == s)
    }

    pub fn holds(self, eq: bool, lt: bool) -> bool {
        match self {
            Cond::Eq => eq,
            Cond::Ne => !eq,
            Cond::Lt => lt,
            Cond::Ge => !lt,
            Cond::Gt => !lt && !eq,
            Cond::Le => lt || eq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instruction {
    Halt,
    Ret,
    Trap(u8),
    Br(i16),
    Call(i16),
    EmitU8 { stream: u8, imm: u8 },
    EmitU16 { stream: u8, imm: u16 },
    Ldi { stream: u8, imm: u32 },
    Copy { tag: TypeTag, src: u8, dst: u8 },
    Skip { tag: TypeTag, stream: u8 },
    Cmp { tag: TypeTag, a: u8, b: u8 },
    Brc { cond: Cond, rel: i16 },
    BrcEnd { stream: u8, rel: i16 },
    MkIdx { reg: u8, stream: u8 },
    Seek { reg: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IllegalOpcode {
    pub offset: usize,
    pub byte: u8,
}

impl std::error::Error for IllegalOpcode {}

impl fmt::Display for IllegalOpcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "illegal opcode {:#04x} @{}", self.byte, self.offset)
    }
}

/// Encoded length as a function of the first byte; `None` for unassigned opcodes.
pub fn instruction_length(first: u8) -> Option<usize> {
    match first {
        0x00 | 0x01 => Some(1),
        0x02 => Some(2),
        0x03..=0x05 => Some(3),
        0x06 => Some(4),
        0x07 => Some(6),
        0x10..=0x3F if first & 0x0F != 0x0F => Some(2),
        0x40..=0x45 => Some(3),
        0x50..=0x5F => Some(3),
        0x60..=0x67 => Some(2),
        0x70..=0x77 => Some(1),
        _ => None,
    }
}

impl Instruction {
    pub fn len(&self) -> usize {
        self.encode_first_byte()
            .and_then(instruction_length)
            .expect("every constructed instruction has a legal first byte")
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn encode_first_byte(&self) -> Option<u8> {
        Some(match *self {
            Instruction::Halt => 0x00,
            Instruction::Ret => 0x01,
            Instruction::Trap(_) => 0x02,
            Instruction::Br(_) => 0x03,
            Instruction::Call(_) => 0x04,
            Instruction::EmitU8 { .. } => 0x05,
            Instruction::EmitU16 { .. } => 0x06,
            Instruction::Ldi { .. } => 0x07,
            Instruction::Copy { tag, .. } => 0x10 | tag.nibble(),
            Instruction::Skip { tag, .. } => 0x20 | tag.nibble(),
            Instruction::Cmp { tag, .. } => 0x30 | tag.nibble(),
            Instruction::Brc { cond, .. } => 0x40 | cond as u8,
            Instruction::BrcEnd { stream, .. } => 0x50 | (stream & 0x0F),
            Instruction::MkIdx { reg, .. } => 0x60 | (reg & 0x07),
            Instruction::Seek { reg } => 0x70 | (reg & 0x07),
        })
    }

    /// Branch or call displacement, if any.
    pub fn rel(&self) -> Option<i16> {
        match *self {
            Instruction::Br(r) | Instruction::Call(r) => Some(r),
            Instruction::Brc { rel, .. } | Instruction::BrcEnd { rel, .. } => Some(rel),
            _ => None,
        }
    }

    pub fn with_rel(self, rel: i16) -> Self {
        match self {
            Instruction::Br(_) => Instruction::Br(rel),
            Instruction::Call(_) => Instruction::Call(rel),
            Instruction::Brc { cond, .. } => Instruction::Brc { cond, rel },
            Instruction::BrcEnd { stream, .. } => Instruction::BrcEnd { stream, rel },
            other => other,
        }
    }

    pub fn encode(&self, out: &mut Vec<u8>) {
        let first = self.encode_first_byte().expect("legal instruction");
        out.push(first);
        match *self {
            Instruction::Halt | Instruction::Ret | Instruction::Seek { .. } => {}
            Instruction::Trap(code) => out.push(code),
            Instruction::Br(r)
            | Instruction::Call(r)
            | Instruction::Brc { rel: r, .. }
            | Instruction::BrcEnd { rel: r, .. } => out.extend_from_slice(&r.to_le_bytes()),
            Instruction::EmitU8 { stream, imm } => out.extend_from_slice(&[stream << 4, imm]),
            Instruction::EmitU16 { stream, imm } => {
                out.push(stream << 4);
                out.extend_from_slice(&imm.to_le_bytes());
            }
            Instruction::Ldi { stream, imm } => {
                out.push(stream << 4);
                out.extend_from_slice(&imm.to_le_bytes());
            }
            Instruction::Copy { src, dst, .. } => out.push(src << 4 | dst),
            Instruction::Skip { stream, .. } | Instruction::MkIdx { stream, .. } => {
                out.push(stream << 4)
            }
            Instruction::Cmp { a, b, .. } => out.push(a << 4 | b),
        }
    }

    /// Decodes the instruction at `offset`.
    pub fn decode(code: &[u8], offset: usize) -> Result<Instruction, IllegalOpcode> {
        let first = *code.get(offset).ok_or(IllegalOpcode { offset, byte: 0 })?;
        let illegal = IllegalOpcode {
            offset,
            byte: first,
        };
        let len = instruction_length(first).ok_or(illegal)?;
        let ops = code.get(offset + 1..offset + len).ok_or(illegal)?;
        let i16_at = |i: usize| i16::from_le_bytes([ops[i], ops[i + 1]]);
        let high_only = |b: u8| {
            if b & 0x0F != 0 {
                Err(illegal)
            } else {
                Ok(b >> 4)
            }
        };
        let tag = || TypeTag::from_nibble(first & 0x0F).ok_or(illegal);
        Ok(match first {
            0x00 => Instruction::Halt,
            0x01 => Instruction::Ret,
            0x02 => Instruction::Trap(ops[0]),
            0x03 => Instruction::Br(i16_at(0)),
            0x04 => Instruction::Call(i16_at(0)),
            0x05 => Instruction::EmitU8 {
                stream: high_only(ops[0])?,
                imm: ops[1],
            },
            0x06 => Instruction::EmitU16 {
                stream: high_only(ops[0])?,
                imm: u16::from_le_bytes([ops[1], ops[2]]),
            },
            0x07 => Instruction::Ldi {
                stream: high_only(ops[0])?,
                imm: u32::from_le_bytes([ops[1], ops[2], ops[3], ops[4]]),
            },
            0x10..=0x1F => Instruction::Copy {
                tag: tag()?,
                src: ops[0] >> 4,
                dst: ops[0] & 0x0F,
            },
            0x20..=0x2F => Instruction::Skip {
                tag: tag()?,
                stream: high_only(ops[0])?,
            },
            0x30..=0x3F => Instruction::Cmp {
                tag: tag()?,
                a: ops[0] >> 4,
                b: ops[0] & 0x0F,
            },
            0x40..=0x45 => Instruction::Brc {
                cond: Cond::ALL[(first & 0x0F) as usize],
                rel: i16_at(0),
            },
            0x50..=0x5F => Instruction::BrcEnd {
                stream: first & 0x0F,
                rel: i16_at(0),
            },
            0x60..=0x67 => Instruction::MkIdx {
                reg: first & 0x07,
                stream: high_only(ops[0])?,
            },
            0x70..=0x77 => Instruction::Seek { reg: first & 0x07 },
            _ => return Err(illegal),
        })
    }
}

/// Decodes a whole code image into (offset, instruction) pairs.
pub fn decode_all(code: &[u8]) -> Result<Vec<(usize, Instruction)>, IllegalOpcode> {
    let mut out = Vec::new();
    let mut pc = 0;
    while pc < code.len() {
        let ins = Instruction::decode(code, pc)?;
        out.push((pc, ins));
        pc += ins.len();
    }
    Ok(out)
}
