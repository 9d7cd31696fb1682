use std::cmp::Ordering;

use thiserror::Error;

use crate::codec::{
    decode_value, encode_value, CodecError, DecodeLimits, Value, ValueKind, Variant,
};

use super::isa::{IllegalOpcode, Instruction, TypeTag, INDEX_REGISTERS, STREAM_COUNT};
use super::port::{NamespacePort, NodeStore, Probe, INDEX_ENTRY_BYTES};
use super::stream::{Mark, Stream};
use super::VmProgram;

pub const STACK_DEPTH: usize = 64;

pub const S_REQUEST: u8 = 0;
pub const S_RESPONSE: u8 = 1;
pub const S_PORT: u8 = 2;
pub const S_CONTEXT: u8 = 3;

const SCRATCH_CAPACITY: usize = 256;
const PORT_CAPACITY: usize = 8192;

const VALUE_LIMITS: DecodeLimits = DecodeLimits {
    max_string_len: 8192,
    max_array_len: 0,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum Trap {
    #[error("stream s{0} overrun")]
    StreamOverrun(u8),
    #[error("stack overflow")]
    StackOverflow,
    #[error("stack underflow")]
    StackUnderflow,
    #[error("{0}")]
    IllegalOpcode(IllegalOpcode),
    #[error("bytes on s{stream} are not a valid {tag:?}")]
    TypeMismatch { stream: u8, tag: TypeTag },
    #[error("program counter {0} outside code")]
    PcOutOfBounds(usize),
    #[error("index register x{0} unset or stale")]
    BadIndex(u8),
    #[error("invalid namespace port command")]
    PortCommand,
    #[error("TRAP {0}")]
    User(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Halted,
    Trapped(Trap),
    BudgetExhausted,
}

/// Address region of a logged memory access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// The stage's message buffer (request and response streams).
    StageBuffer,
    /// The namespace image.
    Namespace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemAccess {
    /// VM cycle count when the access is issued.
    pub cycle: u64,
    pub region: Region,
    pub bytes: u32,
    pub write: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub outcome: Outcome,
    pub cycles: u64,
    pub response: Vec<u8>,
    pub accesses: Vec<MemAccess>,
}

/// Result of a single step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Continue,
    Done(Outcome),
}

#[derive(Debug, Clone)]
pub struct Vm {
    pub pc: usize,
    pub sp: usize,
    stack: [u32; STACK_DEPTH],
    pub eq: bool,
    pub lt: bool,
    streams: Vec<Stream>,
    index: [Option<Mark>; INDEX_REGISTERS],
    port: NamespacePort,
    pub cycles: u64,
    accesses: Vec<MemAccess>,
    done: Option<Outcome>,
}

/// Codec kind used to decode a value of this tag. Strings use byte-string rules.
fn kind(tag: TypeTag) -> ValueKind {
    match tag {
        TypeTag::Bool => ValueKind::Boolean,
        TypeTag::I8 => ValueKind::SByte,
        TypeTag::U8 => ValueKind::Byte,
        TypeTag::I16 => ValueKind::Int16,
        TypeTag::U16 => ValueKind::UInt16,
        TypeTag::I32 => ValueKind::Int32,
        TypeTag::U32 => ValueKind::UInt32,
        TypeTag::F32 => ValueKind::Float,
        TypeTag::F64 => ValueKind::Double,
        TypeTag::Str => ValueKind::ByteString,
        TypeTag::Nid => ValueKind::NodeId,
        TypeTag::Lt => ValueKind::LocalizedText,
        TypeTag::Qn => ValueKind::QualifiedName,
        TypeTag::Var => ValueKind::Variant,
        TypeTag::Dv => ValueKind::DataValue,
    }
}

fn compare(a: &Value, b: &Value) -> (bool, bool) {
    fn ord(o: Option<Ordering>) -> (bool, bool) {
        (o == Some(Ordering::Equal), o == Some(Ordering::Less))
    }
    use Variant::*;
    match (a, b) {
        (Value::Scalar(x), Value::Scalar(y)) => match (x, y) {
            (Boolean(p), Boolean(q)) => ord(p.partial_cmp(q)),
            (SByte(p), SByte(q)) => ord(p.partial_cmp(q)),
            (Byte(p), Byte(q)) => ord(p.partial_cmp(q)),
            (Int16(p), Int16(q)) => ord(p.partial_cmp(q)),
            (UInt16(p), UInt16(q)) => ord(p.partial_cmp(q)),
            (Int32(p), Int32(q)) => ord(p.partial_cmp(q)),
            (UInt32(p), UInt32(q)) => ord(p.partial_cmp(q)),
            (Float(p), Float(q)) => ord(p.partial_cmp(q)),
            (Double(p), Double(q)) => ord(p.partial_cmp(q)),
            (ByteString(p), ByteString(q)) => ord(p.partial_cmp(q)),
            (NodeId(p), NodeId(q)) => ord(p.partial_cmp(q)),
            (QualifiedName(p), QualifiedName(q)) => ord(p.partial_cmp(q)),
            (LocalizedText(p), LocalizedText(q)) => ord(p.partial_cmp(q)),
            _ => (x == y, false),
        },
        _ => (a == b, false),
    }
}

impl Vm {
    /// Binds the request, a response buffer of the given capacity and the context bytes.
    pub fn new(request: Vec<u8>, response_capacity: usize, context: Vec<u8>) -> Self {
        let mut streams: Vec<Stream> = (0..STREAM_COUNT)
            .map(|_| Stream::new(SCRATCH_CAPACITY))
            .collect();
        streams[S_REQUEST as usize] = Stream::with_data(request);
        streams[S_RESPONSE as usize] = Stream::new(response_capacity);
        streams[S_PORT as usize] = Stream::new(PORT_CAPACITY);
        streams[S_CONTEXT as usize] = Stream::with_data(context);
        Vm {
            pc: 0,
            sp: 0,
            stack: [0; STACK_DEPTH],
            eq: false,
            lt: false,
            streams,
            index: [None; INDEX_REGISTERS],
            port: NamespacePort::new(),
            cycles: 0,
            accesses: Vec::new(),
            done: None,
        }
    }

    pub fn pc(&self) -> usize {
        self.pc
    }

    pub fn set_pc(&mut self, pc: usize) {
        self.pc = pc;
    }

    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    pub fn stream(&self, s: u8) -> &Stream {
        &self.streams[s as usize]
    }

    pub fn stream_mut(&mut self, s: u8) -> &mut Stream {
        &mut self.streams[s as usize]
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.done
    }

    pub fn accesses(&self) -> &[MemAccess] {
        &self.accesses
    }

    fn log(&mut self, stream: u8, bytes: usize, write: bool, at: u64) {
        if bytes > 0 && (stream == S_REQUEST || stream == S_RESPONSE) {
            self.accesses.push(MemAccess {
                cycle: at,
                region: Region::StageBuffer,
                bytes: bytes as u32,
                write,
            });
        }
    }

    fn log_probe(&mut self, p: &Probe, at: u64) {
        for _ in 0..p.index_probes {
            self.accesses.push(MemAccess {
                cycle: at,
                region: Region::Namespace,
                bytes: INDEX_ENTRY_BYTES,
                write: false,
            });
        }
        for (bytes, write) in [(p.record_bytes, false), (p.slot_bytes, p.slot_write)] {
            if bytes > 0 {
                self.accesses.push(MemAccess {
                    cycle: at,
                    region: Region::Namespace,
                    bytes,
                    write,
                });
            }
        }
    }

    fn peek(&self, s: u8, tag: TypeTag) -> Result<(Value, usize), Trap> {
        decode_value(self.streams[s as usize].unread(), kind(tag), VALUE_LIMITS).map_err(
            |e| match e {
                CodecError::Truncated { .. } => Trap::StreamOverrun(s),
                _ => Trap::TypeMismatch { stream: s, tag },
            },
        )
    }

    fn write_stream(
        &mut self,
        s: u8,
        bytes: &[u8],
        store: &mut dyn NodeStore,
        at: u64,
    ) -> Result<(), Trap> {
        if s == S_PORT {
            let out = self
                .port
                .write(bytes, store)
                .map_err(|_| Trap::PortCommand)?;
            for p in &out.probes {
                self.log_probe(p, at);
            }
            // The port is a FIFO: consumed results free their room.
            let fifo = &mut self.streams[S_PORT as usize];
            if fifo.at_end() {
                fifo.replace(&[]);
            }
            if !fifo.write(&out.result) {
                return Err(Trap::StreamOverrun(S_PORT));
            }
            return Ok(());
        }
        if !self.streams[s as usize].write(bytes) {
            return Err(Trap::StreamOverrun(s));
        }
        self.log(s, bytes.len(), true, at);
        Ok(())
    }

    fn jump(&mut self, next: usize, rel: i16, code_len: usize) -> Result<(), Trap> {
        let target = next as i64 + rel as i64;
        if target < 0 || target as usize >= code_len {
            return Err(Trap::PcOutOfBounds(target.max(0) as usize));
        }
        self.pc = target as usize;
        Ok(())
    }

    /// Executes one instruction.
    pub fn step(&mut self, code: &[u8], store: &mut dyn NodeStore, budget: u64) -> Step {
        if let Some(o) = self.done {
            return Step::Done(o);
        }
        match self.try_step(code, store, budget) {
            Ok(Step::Continue) => Step::Continue,
            Ok(Step::Done(o)) => {
                self.done = Some(o);
                Step::Done(o)
            }
            Err(t) => {
                self.done = Some(Outcome::Trapped(t));
                Step::Done(Outcome::Trapped(t))
            }
        }
    }

    fn charge(&mut self, cost: u64, budget: u64) -> bool {
        if self.cycles + cost > budget {
            self.cycles = budget;
            false
        } else {
            self.cycles += cost;
            true
        }
    }

    fn try_step(
        &mut self,
        code: &[u8],
        store: &mut dyn NodeStore,
        budget: u64,
    ) -> Result<Step, Trap> {
        if self.pc >= code.len() {
            return Err(Trap::PcOutOfBounds(self.pc));
        }
        let ins = Instruction::decode(code, self.pc).map_err(Trap::IllegalOpcode)?;
        let len = ins.len();
        let next = self.pc + len;
        let at = self.cycles + len as u64;
        macro_rules! charge {
            ($data:expr) => {
                if !self.charge(len as u64 + $data as u64, budget) {
                    return Ok(Step::Done(Outcome::BudgetExhausted));
                }
            };
        }
        match ins {
            Instruction::Halt => {
                charge!(0);
                return Ok(Step::Done(Outcome::Halted));
            }
            Instruction::Ret => {
                charge!(0);
                if self.sp == 0 {
                    return Err(Trap::StackUnderflow);
                }
                self.pc = self.stack[self.sp] as usize;
                self.sp -= 1;
                return Ok(Step::Continue);
            }
            Instruction::Trap(code) => {
                charge!(0);
                return Err(Trap::User(code));
            }
            Instruction::Br(rel) => {
                charge!(0);
                self.jump(next, rel, code.len())?;
                return Ok(Step::Continue);
            }
            Instruction::Call(rel) => {
                charge!(0);
                if self.sp + 1 >= STACK_DEPTH {
                    return Err(Trap::StackOverflow);
                }
                self.sp += 1;
                self.stack[self.sp] = next as u32;
                self.jump(next, rel, code.len())?;
                return Ok(Step::Continue);
            }
            Instruction::Brc { cond, rel } => {
                charge!(0);
                if cond.holds(self.eq, self.lt) {
                    self.jump(next, rel, code.len())?;
                    return Ok(Step::Continue);
                }
            }
            Instruction::BrcEnd { stream, rel } => {
                charge!(0);
                if self.streams[stream as usize].at_end() {
                    self.jump(next, rel, code.len())?;
                    return Ok(Step::Continue);
                }
            }
            Instruction::EmitU8 { stream, imm } => {
                charge!(1);
                self.write_stream(stream, &[imm], store, at)?;
            }
            Instruction::EmitU16 { stream, imm } => {
                charge!(2);
                self.write_stream(stream, &imm.to_le_bytes(), store, at)?;
            }
            Instruction::Ldi { stream, imm } => {
                charge!(4);
                if stream == S_PORT {
                    self.write_stream(stream, &imm.to_le_bytes(), store, at)?;
                } else if !self.streams[stream as usize].replace(&imm.to_le_bytes()) {
                    return Err(Trap::StreamOverrun(stream));
                }
            }
            Instruction::Copy { tag, src, dst } => {
                let (value, used) = self.peek(src, tag)?;
                charge!(used);
                self.streams[src as usize].advance(used);
                self.log(src, used, false, at);
                self.write_stream(dst, &encode_value(&value), store, at)?;
            }
            Instruction::Skip { tag, stream } => {
                let (_, used) = self.peek(stream, tag)?;
                charge!(used);
                self.streams[stream as usize].advance(used);
                self.log(stream, used, false, at);
            }
            Instruction::Cmp { tag, a, b } => {
                let (va, na) = self.peek(a, tag)?;
                let (vb, nb) = self.peek(b, tag)?;
                charge!(na + nb);
                self.log(a, na, false, at);
                self.log(b, nb, false, at);
                (self.eq, self.lt) = compare(&va, &vb);
            }
            Instruction::MkIdx { reg, stream } => {
                charge!(0);
                self.index[reg as usize] = Some(self.streams[stream as usize].mark(stream));
            }
            Instruction::Seek { reg } => {
                charge!(0);
                let m = self.index[reg as usize].ok_or(Trap::BadIndex(reg))?;
                if !self.streams[m.stream as usize].restore(&m) {
                    return Err(Trap::BadIndex(reg));
                }
            }
        }
        self.pc = next;
        Ok(Step::Continue)
    }

    /// Runs until HALT, a trap or the budget is spent.
    pub fn run(&mut self, code: &[u8], store: &mut dyn NodeStore, budget: u64) -> Outcome {
        loop {
            if let Step::Done(o) = self.step(code, store, budget) {
                return o;
            }
        }
    }

    pub fn into_result(self) -> RunResult {
        RunResult {
            outcome: self.done.unwrap_or(Outcome::BudgetExhausted),
            cycles: self.cycles,
            response: self.streams[S_RESPONSE as usize].contents().to_vec(),
            accesses: self.accesses,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("no entry point for service type {0}")]
    NoEntryPoint(u32),
}

/// Runs the program's entry point for `service` over freshly bound streams.
pub fn run_service(
    program: &VmProgram,
    service: u32,
    request: Vec<u8>,
    response_capacity: usize,
    context: Vec<u8>,
    store: &mut dyn NodeStore,
    budget: u64,
) -> Result<RunResult, RunError> {
    let entry = *program
        .entry_points
        .get(&service)
        .ok_or(RunError::NoEntryPoint(service))?;
    let mut vm = Vm::new(request, response_capacity, context);
    vm.set_pc(entry as usize);
    vm.run(&program.code, store, budget);
    Ok(vm.into_result())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streamvm::isa::Cond;
    use crate::streamvm::port::tests::store;

    fn code(ins: &[Instruction]) -> Vec<u8> {
        let mut out = Vec::new();
        for i in ins {
            i.encode(&mut out);
        }
        out
    }

    fn run(ins: &[Instruction], request: Vec<u8>, budget: u64) -> (Vm, Outcome) {
        let c = code(ins);
        let mut vm = Vm::new(request, 64, vec![0; 8]);
        let mut s = store();
        let o = vm.run(&c, &mut s, budget);
        (vm, o)
    }

    #[test]
    fn copy_i32() {
        let (vm, o) = run(
            &[
                Instruction::Copy {
                    tag: TypeTag::I32,
                    src: 0,
                    dst: 1,
                },
                Instruction::Halt,
            ],
            vec![5, 0, 0, 0],
            100,
        );
        assert_eq!(o, Outcome::Halted);
        assert_eq!(vm.stream(1).contents(), &[5, 0, 0, 0]);
        assert_eq!(vm.stream(0).read_pos(), 4);
        // 2 instruction bytes + 4 data + 1 for HALT
        assert_eq!(vm.cycles, 7);
    }

    #[test]
    fn cmp_u32_equal() {
        let (vm, _) = run(
            &[
                Instruction::Ldi { stream: 4, imm: 9 },
                Instruction::Cmp {
                    tag: TypeTag::U32,
                    a: 0,
                    b: 4,
                },
                Instruction::Halt,
            ],
            vec![9, 0, 0, 0],
            100,
        );
        assert!(vm.eq && !vm.lt);
        assert_eq!(vm.stream(0).read_pos(), 0);
    }

    #[test]
    fn call_at_full_stack_overflows() {
        let mut vm = Vm::new(vec![], 0, vec![]);
        vm.sp = STACK_DEPTH - 1;
        let c = code(&[Instruction::Call(-3)]);
        let o = vm.run(&c, &mut store(), 100);
        assert_eq!(o, Outcome::Trapped(Trap::StackOverflow));
        let (_, o) = run(&[Instruction::Ret], vec![], 10);
        assert_eq!(o, Outcome::Trapped(Trap::StackUnderflow));
    }

    #[test]
    fn recursion_hits_the_stack_bound() {
        let (vm, o) = run(&[Instruction::Call(-3)], vec![], 10_000);
        assert_eq!(o, Outcome::Trapped(Trap::StackOverflow));
        assert_eq!(vm.sp, STACK_DEPTH - 1);
    }

    #[test]
    fn infinite_loop_exhausts_budget_exactly() {
        let (vm, o) = run(&[Instruction::Br(-3)], vec![], 1_000_000);
        assert_eq!(o, Outcome::BudgetExhausted);
        assert_eq!(vm.cycles, 1_000_000);
    }

    #[test]
    fn overrun_and_type_mismatch() {
        let (_, o) = run(
            &[Instruction::Skip {
                tag: TypeTag::U32,
                stream: 0,
            }],
            vec![1, 2],
            100,
        );
        assert_eq!(o, Outcome::Trapped(Trap::StreamOverrun(0)));
        let (_, o) = run(
            &[Instruction::Skip {
                tag: TypeTag::Nid,
                stream: 0,
            }],
            vec![9, 2],
            100,
        );
        assert!(matches!(o, Outcome::Trapped(Trap::TypeMismatch { .. })));
    }

    #[test]
    fn mkidx_seek_restores_cursors() {
        let (vm, o) = run(
            &[
                Instruction::MkIdx { reg: 0, stream: 0 },
                Instruction::Skip {
                    tag: TypeTag::U8,
                    stream: 0,
                },
                Instruction::Seek { reg: 0 },
                Instruction::Copy {
                    tag: TypeTag::U16,
                    src: 0,
                    dst: 1,
                },
                Instruction::Halt,
            ],
            vec![1, 2],
            100,
        );
        assert_eq!(o, Outcome::Halted);
        assert_eq!(vm.stream(1).contents(), &[1, 2]);
    }

    #[test]
    fn loop_until_end_of_stream() {
        // copy bytes one by one: loop: BRC end s0 -> done; COPY.u8; BR loop; done: HALT
        let (vm, o) = run(
            &[
                Instruction::BrcEnd { stream: 0, rel: 5 },
                Instruction::Copy {
                    tag: TypeTag::U8,
                    src: 0,
                    dst: 1,
                },
                Instruction::Br(-8),
                Instruction::Halt,
            ],
            vec![1, 2, 3],
            1000,
        );
        assert_eq!(o, Outcome::Halted);
        assert_eq!(vm.stream(1).contents(), &[1, 2, 3]);
    }

    #[test]
    fn brc_conditions_follow_flags() {
        let (vm, _) = run(
            &[
                Instruction::Ldi { stream: 4, imm: 1 },
                Instruction::Ldi { stream: 5, imm: 2 },
                Instruction::Cmp {
                    tag: TypeTag::I32,
                    a: 4,
                    b: 5,
                },
                Instruction::Brc {
                    cond: Cond::Lt,
                    rel: 1,
                },
                Instruction::Halt,
                Instruction::EmitU8 { stream: 1, imm: 7 },
                Instruction::Halt,
            ],
            vec![],
            1000,
        );
        assert_eq!(vm.stream(1).contents(), &[7]);
    }

    #[test]
    fn port_read_through_stream_two() {
        let mut req = vec![];
        use crate::codec::BinaryCodec;
        crate::codec::NodeId::numeric(1, 1003).encode(&mut req);
        req.extend_from_slice(&13u32.to_le_bytes());
        let (vm, o) = run(
            &[
                Instruction::EmitU8 { stream: 2, imm: 1 },
                Instruction::Copy {
                    tag: TypeTag::Nid,
                    src: 0,
                    dst: 2,
                },
                Instruction::Copy {
                    tag: TypeTag::U32,
                    src: 0,
                    dst: 2,
                },
                Instruction::Copy {
                    tag: TypeTag::Dv,
                    src: 2,
                    dst: 1,
                },
                Instruction::Halt,
            ],
            req,
            1000,
        );
        assert_eq!(o, Outcome::Halted);
        assert_eq!(vm.stream(1).contents(), &[0x01, 0x06, 0, 0, 0, 0]);
        assert!(vm.accesses().iter().any(|a| a.region == Region::Namespace));
    }
}
