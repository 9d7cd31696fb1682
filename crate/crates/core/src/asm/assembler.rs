//! Two-pass assembler and disassembler for stream VM programs.
//!
//! This file depends only on `std`, `thiserror`, the ISA and the image type so
//! that the build script can include it to assemble the bundled programs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use thiserror::Error;

use super::isa::{
    decode_all, Cond, IllegalOpcode, Instruction, TypeTag, INDEX_REGISTERS, STREAM_COUNT,
};
use super::VmProgram;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmErrorKind {
    #[error("undefined label `{0}`")]
    UndefinedLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("operand out of range: {0}")]
    OperandOutOfRange(String),
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("syntax error: {0}")]
    Syntax(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct AsmError {
    pub line: usize,
    pub kind: AsmErrorKind,
}

/// Every error found in one source, ordered by line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct AsmErrors(pub Vec<AsmError>);

impl fmt::Display for AsmErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DisasmError {
    #[error("{0}")]
    Illegal(#[from] IllegalOpcode),
    #[error("entry point {offset} for service {service} is not an instruction boundary")]
    BadEntry { service: u32, offset: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Target {
    Label(String),
    Raw(i16),
}

#[derive(Debug, Clone)]
struct Line {
    number: usize,
    labels: Vec<String>,
    entry: Option<(u32, String)>,
    ins: Option<(Instruction, Option<Target>)>,
}

fn err(line: usize, kind: AsmErrorKind) -> AsmError {
    AsmError { line, kind }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn parse_int(s: &str) -> Option<i64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let v = match body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        Some(hex) => i64::from_str_radix(&hex.replace('_', ""), 16).ok()?,
        None => body.replace('_', "").parse::<i64>().ok()?,
    };
    Some(if neg { -v } else { v })
}

struct Operands<'a> {
    line: usize,
    items: Vec<&'a str>,
}

impl<'a> Operands<'a> {
    fn expect(&self, n: usize) -> Result<(), AsmError> {
        if self.items.len() != n {
            return Err(err(
                self.line,
                AsmErrorKind::Syntax(format!(
                    "expected {n} operand(s), found {}",
                    self.items.len()
                )),
            ));
        }
        Ok(())
    }

    fn register(&self, i: usize, prefix: char, limit: usize) -> Result<u8, AsmError> {
        let s = self.items[i];
        let n = s
            .strip_prefix(prefix)
            .and_then(|d| d.parse::<usize>().ok())
            .ok_or_else(|| {
                err(
                    self.line,
                    AsmErrorKind::Syntax(format!("expected {prefix}N, found `{s}`")),
                )
            })?;
        if n >= limit {
            return Err(err(
                self.line,
                AsmErrorKind::OperandOutOfRange(format!("{s} (limit {prefix}{})", limit - 1)),
            ));
        }
        Ok(n as u8)
    }

    fn stream(&self, i: usize) -> Result<u8, AsmError> {
        self.register(i, 's', STREAM_COUNT)
    }

    fn index(&self, i: usize) -> Result<u8, AsmError> {
        self.register(i, 'x', INDEX_REGISTERS)
    }

    fn imm(&self, i: usize, min: i64, max: i64) -> Result<i64, AsmError> {
        let s = self.items[i];
        let v = parse_int(s).ok_or_else(|| {
            err(
                self.line,
                AsmErrorKind::Syntax(format!("expected an integer, found `{s}`")),
            )
        })?;
        if v < min || v > max {
            return Err(err(
                self.line,
                AsmErrorKind::OperandOutOfRange(format!("{s} not in {min}..={max}")),
            ));
        }
        Ok(v)
    }

    fn target(&self, i: usize) -> Result<Target, AsmError> {
        let s = self.items[i];
        if let Some(raw) = s.strip_prefix('@') {
            let v = parse_int(raw)
                .ok_or_else(|| err(self.line, AsmErrorKind::Syntax(format!("bad offset `{s}`"))))?;
            return i16::try_from(v).map(Target::Raw).map_err(|_| {
                err(
                    self.line,
                    AsmErrorKind::OperandOutOfRange(format!("offset {v}")),
                )
            });
        }
        if !is_ident(s) {
            return Err(err(
                self.line,
                AsmErrorKind::Syntax(format!("bad label `{s}`")),
            ));
        }
        Ok(Target::Label(s.to_string()))
    }
}

fn parse_instruction(line: usize, text: &str) -> Result<(Instruction, Option<Target>), AsmError> {
    let (mnemonic, rest) = match text.split_once(char::is_whitespace) {
        Some((m, r)) => (m, r.trim()),
        None => (text, ""),
    };
    let items: Vec<&str> = if rest.is_empty() {
        Vec::new()
    } else {
        rest.split(',').map(str::trim).collect()
    };
    let ops = Operands { line, items };
    let (op, suffix) = match mnemonic.split_once('.') {
        Some((o, s)) => (o.to_ascii_uppercase(), Some(s.to_ascii_lowercase())),
        None => (mnemonic.to_ascii_uppercase(), None),
    };
    let unknown = || err(line, AsmErrorKind::UnknownMnemonic(mnemonic.to_string()));
    let tag = || {
        suffix
            .as_deref()
            .and_then(TypeTag::from_suffix)
            .ok_or_else(unknown)
    };
    let none = |ins: Instruction| Ok((ins, None));
    match (op.as_str(), suffix.as_deref()) {
        ("HALT", None) => ops.expect(0).and_then(|_| none(Instruction::Halt)),
        ("RET", None) => ops.expect(0).and_then(|_| none(Instruction::Ret)),
        ("TRAP", None) => {
            ops.expect(1)?;
            none(Instruction::Trap(ops.imm(0, 0, 255)? as u8))
        }
        ("BR", None) => {
            ops.expect(1)?;
            Ok((Instruction::Br(0), Some(ops.target(0)?)))
        }
        ("CALL", None) => {
            ops.expect(1)?;
            Ok((Instruction::Call(0), Some(ops.target(0)?)))
        }
        ("EMIT", Some("u8")) => {
            ops.expect(2)?;
            none(Instruction::EmitU8 {
                stream: ops.stream(0)?,
                imm: ops.imm(1, i8::MIN as i64, u8::MAX as i64)? as u8,
            })
        }
        ("EMIT", Some("u16")) => {
            ops.expect(2)?;
            none(Instruction::EmitU16 {
                stream: ops.stream(0)?,
                imm: ops.imm(1, i16::MIN as i64, u16::MAX as i64)? as u16,
            })
        }
        ("LDI", None) => {
            ops.expect(2)?;
            none(Instruction::Ldi {
                stream: ops.stream(0)?,
                imm: ops.imm(1, i32::MIN as i64, u32::MAX as i64)? as u32,
            })
        }
        ("COPY", Some(_)) => {
            let tag = tag()?;
            ops.expect(2)?;
            none(Instruction::Copy {
                tag,
                src: ops.stream(0)?,
                dst: ops.stream(1)?,
            })
        }
        ("SKIP", Some(_)) => {
            let tag = tag()?;
            ops.expect(1)?;
            none(Instruction::Skip {
                tag,
                stream: ops.stream(0)?,
            })
        }
        ("CMP", Some(_)) => {
            let tag = tag()?;
            ops.expect(2)?;
            none(Instruction::Cmp {
                tag,
                a: ops.stream(0)?,
                b: ops.stream(1)?,
            })
        }
        ("BRC", None) => {
            let first = ops.items.first().map(|s| s.to_ascii_lowercase());
            if first.as_deref() == Some("end") {
                ops.expect(3)?;
                Ok((
                    Instruction::BrcEnd {
                        stream: ops.stream(1)?,
                        rel: 0,
                    },
                    Some(ops.target(2)?),
                ))
            } else {
                ops.expect(2)?;
                let cond = first.as_deref().and_then(Cond::from_name).ok_or_else(|| {
                    err(
                        line,
                        AsmErrorKind::Syntax(format!("unknown condition `{}`", ops.items[0])),
                    )
                })?;
                Ok((Instruction::Brc { cond, rel: 0 }, Some(ops.target(1)?)))
            }
        }
        ("MKIDX", None) => {
            ops.expect(2)?;
            none(Instruction::MkIdx {
                reg: ops.index(0)?,
                stream: ops.stream(1)?,
            })
        }
        ("SEEK", None) => {
            ops.expect(1)?;
            none(Instruction::Seek { reg: ops.index(0)? })
        }
        _ => Err(unknown()),
    }
}

fn parse_line(number: usize, raw: &str) -> Result<Line, AsmError> {
    let mut text = raw.split(';').next().unwrap_or("").trim();
    let mut line = Line {
        number,
        labels: Vec::new(),
        entry: None,
        ins: None,
    };
    while let Some((head, tail)) = text.split_once(':') {
        let head = head.trim();
        if !is_ident(head) {
            break;
        }
        line.labels.push(head.to_string());
        text = tail.trim();
    }
    if text.is_empty() {
        return Ok(line);
    }
    if let Some(rest) = text.strip_prefix(".entry") {
        let parts: Vec<&str> = rest.split_whitespace().collect();
        let [service, label] = parts[..] else {
            return Err(err(
                number,
                AsmErrorKind::Syntax(".entry takes <service> <label>".into()),
            ));
        };
        let service = parse_int(service)
            .and_then(|v| u32::try_from(v).ok())
            .ok_or_else(|| {
                err(
                    number,
                    AsmErrorKind::OperandOutOfRange(format!("service `{service}`")),
                )
            })?;
        if !is_ident(label) {
            return Err(err(
                number,
                AsmErrorKind::Syntax(format!("bad label `{label}`")),
            ));
        }
        line.entry = Some((service, label.to_string()));
        return Ok(line);
    }
    if text.starts_with('.') {
        let name = text.split_whitespace().next().unwrap_or(text);
        return Err(err(number, AsmErrorKind::UnknownMnemonic(name.to_string())));
    }
    line.ins = Some(parse_instruction(number, text)?);
    Ok(line)
}

/// Parsed source with label addresses (pass one).
struct Layout {
    lines: Vec<Line>,
    labels: HashMap<String, usize>,
    /// Address of each line's instruction, or of the next instruction.
    addresses: Vec<usize>,
    size: usize,
}

fn layout(src: &str) -> Result<Layout, AsmErrors> {
    let mut errors = Vec::new();
    let mut lines = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        match parse_line(i + 1, raw) {
            Ok(l) => lines.push(l),
            Err(e) => errors.push(e),
        }
    }
    let mut labels = HashMap::new();
    let mut addresses = Vec::with_capacity(lines.len());
    let mut pc = 0usize;
    for l in &lines {
        addresses.push(pc);
        for name in &l.labels {
            if labels.insert(name.clone(), pc).is_some() {
                errors.push(err(l.number, AsmErrorKind::DuplicateLabel(name.clone())));
            }
        }
        if let Some((ins, _)) = &l.ins {
            pc += ins.len();
        }
    }
    if !errors.is_empty() {
        errors.sort_by_key(|e| e.line);
        return Err(AsmErrors(errors));
    }
    Ok(Layout {
        lines,
        labels,
        addresses,
        size: pc,
    })
}

fn resolve(
    lay: &Layout,
    l: &Line,
    at: usize,
    ins: Instruction,
    target: &Target,
) -> Result<Instruction, AsmError> {
    match target {
        Target::Raw(r) => Ok(ins.with_rel(*r)),
        Target::Label(name) => {
            let dest = *lay
                .labels
                .get(name)
                .ok_or_else(|| err(l.number, AsmErrorKind::UndefinedLabel(name.clone())))?;
            let rel = dest as i64 - (at + ins.len()) as i64;
            if rel.abs() > i16::MAX as i64 {
                return Err(err(
                    l.number,
                    AsmErrorKind::OperandOutOfRange(format!("offset {rel} to `{name}`")),
                ));
            }
            Ok(ins.with_rel(rel as i16))
        }
    }
}

/// Assembles source text into a program.
pub fn assemble(name: &str, src: &str) -> Result<VmProgram, AsmErrors> {
    let lay = layout(src)?;
    let mut errors = Vec::new();
    let mut code = Vec::with_capacity(lay.size);
    let mut entry_points = BTreeMap::new();
    for (l, &at) in lay.lines.iter().zip(&lay.addresses) {
        if let Some((service, label)) = &l.entry {
            match lay.labels.get(label) {
                Some(&dest) if dest < lay.size => {
                    if entry_points.insert(*service, dest as u32).is_some() {
                        errors.push(err(
                            l.number,
                            AsmErrorKind::Syntax(format!("second entry for service {service}")),
                        ));
                    }
                }
                Some(_) => errors.push(err(
                    l.number,
                    AsmErrorKind::OperandOutOfRange(format!("entry `{label}` past end of code")),
                )),
                None => errors.push(err(l.number, AsmErrorKind::UndefinedLabel(label.clone()))),
            }
        }
        let Some((ins, target)) = &l.ins else {
            continue;
        };
        let ins = match target {
            Some(t) => match resolve(&lay, l, at, *ins, t) {
                Ok(i) => i,
                Err(e) => {
                    errors.push(e);
                    *ins
                }
            },
            None => *ins,
        };
        ins.encode(&mut code);
    }
    if !errors.is_empty() {
        return Err(AsmErrors(errors));
    }
    Ok(VmProgram {
        name: name.to_string(),
        code,
        entry_points,
    })
}

fn label_name(addr: usize) -> String {
    format!("L{addr:04X}")
}

fn format_instruction(ins: &Instruction, target: Option<&str>) -> String {
    let t = target.unwrap_or("");
    match *ins {
        Instruction::Halt => "HALT".into(),
        Instruction::Ret => "RET".into(),
        Instruction::Trap(c) => format!("TRAP {c}"),
        Instruction::Br(_) => format!("BR {t}"),
        Instruction::Call(_) => format!("CALL {t}"),
        Instruction::EmitU8 { stream, imm } => format!("EMIT.u8 s{stream}, 0x{imm:02X}"),
        Instruction::EmitU16 { stream, imm } => format!("EMIT.u16 s{stream}, 0x{imm:04X}"),
        Instruction::Ldi { stream, imm } => format!("LDI s{stream}, 0x{imm:08X}"),
        Instruction::Copy { tag, src, dst } => format!("COPY.{} s{src}, s{dst}", tag.suffix()),
        Instruction::Skip { tag, stream } => format!("SKIP.{} s{stream}", tag.suffix()),
        Instruction::Cmp { tag, a, b } => format!("CMP.{} s{a}, s{b}", tag.suffix()),
        Instruction::Brc { cond, .. } => format!("BRC {}, {t}", cond.name()),
        Instruction::BrcEnd { stream, .. } => format!("BRC end, s{stream}, {t}"),
        Instruction::MkIdx { reg, stream } => format!("MKIDX x{reg}, s{stream}"),
        Instruction::Seek { reg } => format!("SEEK x{reg}"),
    }
}

/// Renders a listing from decoded instructions, naming every boundary that is
/// branched to or used as an entry point.
fn render(
    entries: &BTreeMap<u32, u32>,
    listing: &[(usize, Instruction)],
    size: usize,
) -> Result<String, DisasmError> {
    let boundaries: BTreeSet<usize> = listing.iter().map(|(o, _)| *o).collect();
    let mut named = BTreeSet::new();
    for (&service, &offset) in entries {
        if !boundaries.contains(&(offset as usize)) {
            return Err(DisasmError::BadEntry { service, offset });
        }
        named.insert(offset as usize);
    }
    let target_of = |at: usize, ins: &Instruction| {
        ins.rel().map(|r| {
            let dest = (at + ins.len()) as i64 + r as i64;
            (dest >= 0 && boundaries.contains(&(dest as usize))).then_some(dest as usize)
        })
    };
    for (at, ins) in listing {
        if let Some(Some(dest)) = target_of(*at, ins) {
            named.insert(dest);
        }
    }
    let mut out = String::new();
    for (service, offset) in entries {
        let _ = writeln!(out, ".entry {service} {}", label_name(*offset as usize));
    }
    for (at, ins) in listing {
        if named.contains(at) {
            let _ = writeln!(out, "{}:", label_name(*at));
        }
        let target = match target_of(*at, ins) {
            Some(Some(dest)) => Some(label_name(dest)),
            Some(None) => Some(format!("@{:+}", ins.rel().unwrap_or(0))),
            None => None,
        };
        let _ = writeln!(out, "    {}", format_instruction(ins, target.as_deref()));
    }
    debug_assert!(listing.last().is_none_or(|(o, i)| o + i.len() == size));
    Ok(out)
}

/// Produces a canonical listing; `assemble` of the result reproduces the code bytes.
pub fn disassemble(p: &VmProgram) -> Result<String, DisasmError> {
    let listing = decode_all(&p.code)?;
    render(&p.entry_points, &listing, p.code.len())
}

/// Rewrites source into the canonical form produced by `disassemble`: comments
/// and blank lines dropped, labels renamed after their address, immediates in
/// hex and entry directives sorted by service.
pub fn canonicalize(src: &str) -> Result<String, AsmErrors> {
    let lay = layout(src)?;
    let mut errors = Vec::new();
    let mut entries = BTreeMap::new();
    let mut listing = Vec::new();
    for (l, &at) in lay.lines.iter().zip(&lay.addresses) {
        if let Some((service, label)) = &l.entry {
            match lay.labels.get(label) {
                Some(&dest) => {
                    entries.insert(*service, dest as u32);
                }
                None => errors.push(err(l.number, AsmErrorKind::UndefinedLabel(label.clone()))),
            }
        }
        if let Some((ins, target)) = &l.ins {
            let ins = match target {
                Some(t) => resolve(&lay, l, at, *ins, t).unwrap_or_else(|e| {
                    errors.push(e);
                    *ins
                }),
                None => *ins,
            };
            listing.push((at, ins));
        }
    }
    if !errors.is_empty() {
        return Err(AsmErrors(errors));
    }
    render(&entries, &listing, lay.size)
        .map_err(|e| AsmErrors(vec![err(0, AsmErrorKind::Syntax(e.to_string()))]))
}
