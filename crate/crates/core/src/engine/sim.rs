//! Cycle-level timing model.
//!
//! Time advances in memory-clock ticks. Processing units (the transport and
//! one unit per S3 stage) consume one engine cycle per engine-clock edge.
//! Stage buffers are local to their stage. Namespace reads and writes, and
//! chunk transfers between the transport and a stage, cross into the memory
//! clock domain one 4-byte word at a time: each word pays the synchronizer
//! delay and then waits for an arbiter grant.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::io;
use std::ops::Range;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{encoding_id, DateTime};
use crate::streamvm::Region;

use super::arbiter::{Arbiter, GRANT_BYTES};
use super::driver::{Driver, Next};
use super::host::{Clock, ConnId, Engine, FrameResult};

/// Engine cycles to parse or emit one frame header.
pub const FRAME_HEADER_CYCLES: u64 = 6;
/// Bytes the transport moves per engine cycle.
pub const TRANSPORT_BYTES_PER_CYCLE: u64 = 1;
/// 2000-01-01 in 100 ns ticks since 1601, the simulated epoch.
const SIM_EPOCH: i64 = 125_911_584_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid clock configuration: {0}")]
    InvalidClock(String),
    #[error("no request with index {0} in the trace")]
    NoSuchRequest(usize),
    #[error("activity window is empty")]
    EmptyWindow,
    #[error("driver waits for a response but nothing is in flight at cycle {0}")]
    Deadlock(u64),
    #[error("run exceeded {0} cycles")]
    CycleLimit(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClockConfig {
    pub engine_mhz: u32,
    pub memory_mhz: u32,
    /// Memory cycles lost crossing clock domains, once per transaction.
    pub sync_penalty: u32,
}

impl Default for ClockConfig {
    fn default() -> Self {
        ClockConfig {
            engine_mhz: 50,
            memory_mhz: 100,
            sync_penalty: 2,
        }
    }
}

impl ClockConfig {
    pub fn at(engine_mhz: u32) -> Self {
        ClockConfig {
            engine_mhz,
            ..ClockConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.engine_mhz == 0 || self.memory_mhz == 0 {
            return Err(SimError::InvalidClock(
                "frequencies must be positive".into(),
            ));
        }
        if self.engine_mhz > self.memory_mhz {
            return Err(SimError::InvalidClock(format!(
                "engine clock {} MHz exceeds memory clock {} MHz",
                self.engine_mhz, self.memory_mhz
            )));
        }
        Ok(())
    }

    /// Whether an engine clock edge falls in memory cycle `t`.
    fn edge(&self, t: u64) -> bool {
        let (f, m) = (self.engine_mhz as u64, self.memory_mhz as u64);
        (t + 1) * f / m > t * f / m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimConfig {
    pub clock: ClockConfig,
    /// Memory cycles between a response and the client's next frame.
    pub think_cycles: u64,
    pub max_cycles: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            clock: ClockConfig::default(),
            think_cycles: 200,
            max_cycles: 500_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum UnitState {
    Idle,
    /// Computing.
    Busy,
    /// Crossing into the memory clock domain.
    Sync,
    /// Requesting the memory port.
    Wait,
}

impl UnitState {
    pub fn name(self) -> &'static str {
        match self {
            UnitState::Idle => "idle",
            UnitState::Busy => "busy",
            UnitState::Sync => "sync",
            UnitState::Wait => "wait",
        }
    }

    fn code(self) -> u8 {
        self as u8
    }
}

/// A unit entering a new state. The state holds until the unit's next record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub cycle: u64,
    pub unit: u16,
    pub state: UnitState,
    /// Requester granted the memory port, on the memory unit only.
    pub grant: Option<u16>,
}

/// Timing of one request from first byte in to last byte out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RequestSample {
    pub conn: u32,
    pub service: u32,
    pub stage: Option<usize>,
    pub arrival: u64,
    pub done: u64,
    pub request_bytes: usize,
    pub response_bytes: usize,
}

impl RequestSample {
    pub fn latency(&self) -> u64 {
        self.done - self.arrival
    }
}

/// Result of a simulated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleTrace {
    pub clock: ClockConfig,
    pub units: Vec<String>,
    pub records: Vec<TraceRecord>,
    pub cycles: u64,
    pub requests: Vec<RequestSample>,
    /// Summed stage-buffer occupancy whenever it changed.
    pub occupancy: Vec<(u64, usize)>,
    pub buffer_budget: usize,
    /// Outbound frames in emission order.
    pub responses: Vec<(u32, Vec<u8>)>,
    busy: Vec<u64>,
}

impl CycleTrace {
    /// Memory cycles from arrival to completion of request `index`.
    pub fn latency(&self, index: usize) -> Result<u64, SimError> {
        self.requests
            .get(index)
            .map(RequestSample::latency)
            .ok_or(SimError::NoSuchRequest(index))
    }

    /// Mean latency over requests of one service type.
    pub fn mean_latency(&self, service: u32) -> Option<f64> {
        let l: Vec<u64> = self
            .requests
            .iter()
            .filter(|r| r.service == service)
            .map(RequestSample::latency)
            .collect();
        (!l.is_empty()).then(|| l.iter().sum::<u64>() as f64 / l.len() as f64)
    }

    /// Share of unit-cycles spent computing or granting over the whole run.
    pub fn activity(&self) -> Result<f64, SimError> {
        if self.cycles == 0 || self.units.is_empty() {
            return Err(SimError::EmptyWindow);
        }
        let busy: u64 = self.busy.iter().sum();
        Ok(busy as f64 / (self.cycles * self.units.len() as u64) as f64)
    }

    /// Share of unit-cycles spent busy within `window`, in memory cycles.
    pub fn activity_in(&self, window: Range<u64>) -> Result<f64, SimError> {
        let end = window.end.min(self.cycles);
        if window.start >= end || self.units.is_empty() {
            return Err(SimError::EmptyWindow);
        }
        let mut since: Vec<Option<u64>> = vec![None; self.units.len()];
        let mut busy = 0u64;
        let overlap = |from: u64, to: u64| to.min(end).saturating_sub(from.max(window.start));
        for r in &self.records {
            let u = r.unit as usize;
            if let Some(from) = since[u].take() {
                busy += overlap(from, r.cycle);
            }
            if r.state == UnitState::Busy {
                since[u] = Some(r.cycle);
            }
        }
        busy += since
            .iter()
            .flatten()
            .map(|&from| overlap(from, self.cycles))
            .sum::<u64>();
        Ok(busy as f64 / ((end - window.start) * self.units.len() as u64) as f64)
    }

    pub fn unit_activity(&self) -> Vec<(String, f64)> {
        self.units
            .iter()
            .zip(&self.busy)
            .map(|(u, &b)| (u.clone(), b as f64 / self.cycles.max(1) as f64))
            .collect()
    }

    pub fn max_occupancy(&self) -> usize {
        self.occupancy.iter().map(|o| o.1).max().unwrap_or(0)
    }

    pub fn within_buffer_budget(&self) -> bool {
        self.max_occupancy() <= self.buffer_budget
    }

    /// SHA-256 over the records, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for r in &self.records {
            h.update(r.cycle.to_le_bytes());
            h.update(r.unit.to_le_bytes());
            h.update([r.state.code()]);
            h.update(r.grant.map_or(u16::MAX, |g| g).to_le_bytes());
        }
        h.update(self.cycles.to_le_bytes());
        h.finalize()
            .iter()
            .fold(String::with_capacity(64), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }

    /// Writes one `cycle unit state [grant]` line per unit per cycle.
    pub fn write_dense(&self, out: &mut impl io::Write) -> io::Result<()> {
        let mut current: Vec<(UnitState, Option<u16>)> =
            vec![(UnitState::Idle, None); self.units.len()];
        let mut next = 0;
        for cycle in 0..self.cycles {
            while next < self.records.len() && self.records[next].cycle == cycle {
                let r = self.records[next];
                current[r.unit as usize] = (r.state, r.grant);
                next += 1;
            }
            for (u, (state, grant)) in current.iter().enumerate() {
                match grant {
                    Some(g) => writeln!(
                        out,
                        "{cycle} {} {} {}",
                        self.units[u],
                        state.name(),
                        self.units[*g as usize]
                    )?,
                    None => writeln!(out, "{cycle} {} {}", self.units[u], state.name())?,
                }
            }
        }
        Ok(())
    }

    /// Writes only state changes, in the dense line format.
    pub fn write_changes(&self, out: &mut impl io::Write) -> io::Result<()> {
        for r in &self.records {
            match r.grant {
                Some(g) => writeln!(
                    out,
                    "{} {} {} {}",
                    r.cycle,
                    self.units[r.unit as usize],
                    r.state.name(),
                    self.units[g as usize]
                )?,
                None => writeln!(
                    out,
                    "{} {} {}",
                    r.cycle,
                    self.units[r.unit as usize],
                    r.state.name()
                )?,
            }
        }
        Ok(())
    }

    /// `key=value` summary lines.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "engine_mhz={}", self.clock.engine_mhz);
        let _ = writeln!(s, "memory_mhz={}", self.clock.memory_mhz);
        let _ = writeln!(s, "sync_penalty={}", self.clock.sync_penalty);
        let _ = writeln!(s, "cycles={}", self.cycles);
        let _ = writeln!(s, "requests={}", self.requests.len());
        for (name, id) in [
            ("read", encoding_id::READ_REQUEST),
            ("write", encoding_id::WRITE_REQUEST),
        ] {
            if let Some(l) = self.mean_latency(id) {
                let _ = writeln!(s, "mean_{name}_latency={l:.1}");
            }
        }
        if let Ok(a) = self.activity() {
            let _ = writeln!(s, "activity={a:.4}");
        }
        for (u, a) in self.unit_activity() {
            let _ = writeln!(s, "activity.{u}={a:.4}");
        }
        let _ = writeln!(s, "max_occupancy={}", self.max_occupancy());
        let _ = writeln!(s, "buffer_budget={}", self.buffer_budget);
        let _ = writeln!(s, "trace_hash={}", self.hash());
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Compute(u64),
    Memory(u32),
    /// Sets a stage's in-flight buffer bytes.
    Hold(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Done {
    Receive(usize),
    Serve(usize),
    Transmit(usize),
}

#[derive(Debug)]
struct Job {
    steps: VecDeque<Step>,
    done: Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    Compute(u64),
    Sync(u32, u32),
    Wait(u32),
    /// Step finished; pick the next one at the start of the next cycle.
    Next,
}

#[derive(Debug)]
struct Unit {
    queue: VecDeque<Job>,
    job: Option<Job>,
    phase: Phase,
    last: Option<(UnitState, Option<u16>)>,
}

#[derive(Debug)]
struct InFlight {
    conn: u32,
    result: FrameResult,
    arrival: u64,
}

#[derive(Debug, Default)]
struct ConnSlot {
    id: Option<ConnId>,
    busy: bool,
    ready_at: u64,
}

struct Sim<'a> {
    engine: &'a mut Engine,
    cfg: SimConfig,
    units: Vec<Unit>,
    arbiter: Arbiter,
    frames: Vec<InFlight>,
    conns: BTreeMap<u32, ConnSlot>,
    partial: Vec<usize>,
    inflight: Vec<usize>,
    trace: CycleTrace,
    completions: Vec<Done>,
}

fn words(bytes: usize) -> u32 {
    (bytes as u64).div_ceil(GRANT_BYTES as u64) as u32
}

fn stream_cycles(bytes: usize) -> u64 {
    FRAME_HEADER_CYCLES + (bytes as u64).div_ceil(TRANSPORT_BYTES_PER_CYCLE)
}

impl Sim<'_> {
    fn clock_at(&self, t: u64) -> Clock {
        let m = self.cfg.clock.memory_mhz as u64;
        Clock {
            now: DateTime(SIM_EPOCH + (t * 10 / m) as i64),
            now_ms: t / (m * 1000),
        }
    }

    fn set_occupancy(&mut self, t: u64) {
        let total: usize = self.partial.iter().sum::<usize>() + self.inflight.iter().sum::<usize>();
        if self.trace.occupancy.last().map(|o| o.1) != Some(total) {
            self.trace.occupancy.push((t, total));
        }
    }

    fn sync_partial(&mut self, t: u64) {
        for (i, s) in self.engine.pool().stages().iter().enumerate() {
            self.partial[i] = s.occupancy();
        }
        self.set_occupancy(t);
    }

    fn arrive(&mut self, t: u64, conn: u32, bytes: Vec<u8>) {
        let slot = self.conns.entry(conn).or_default();
        let id = match slot.id {
            Some(id) => id,
            None => {
                let id = self.engine.connect();
                slot.id = Some(id);
                id
            }
        };
        slot.busy = true;
        let clock = self.clock_at(t);
        let result = self.engine.on_frame(id, &bytes, clock);
        let w = &result.work;
        let idx = self.frames.len();
        // The transport parses the frame as it streams in, then moves the
        // chunk body over the interconnect into the owning stage's buffer.
        let mut steps = VecDeque::from([Step::Compute(stream_cycles(w.rx_bytes))]);
        let to_stage = match (&w.service, w.buffered) {
            (_, Some((_, n))) => n,
            (Some(s), None) if s.stage.is_some() => s.request_bytes,
            _ => 0,
        };
        if let Some(i) = w.service.as_ref().and_then(|s| s.stage) {
            steps.push_back(Step::Hold(
                i,
                w.service.as_ref().map_or(0, |s| s.request_bytes),
            ));
        }
        steps.push_back(Step::Memory(words(to_stage)));
        if w.service.is_none() && w.tx_bytes > 0 {
            steps.push_back(Step::Compute(stream_cycles(w.tx_bytes)));
        }
        self.units[0].queue.push_back(Job {
            steps,
            done: Done::Receive(idx),
        });
        self.frames.push(InFlight {
            conn,
            result,
            arrival: t,
        });
        self.sync_partial(t);
    }

    fn service_job(&self, idx: usize) -> (usize, Job) {
        let s = self.frames[idx]
            .result
            .work
            .service
            .as_ref()
            .expect("service work");
        let mut steps = VecDeque::new();
        if let Some(i) = s.stage {
            let held = match s.vm {
                Some(_) => s.request_bytes + s.response_bytes,
                None => s.request_bytes.max(s.response_bytes),
            };
            steps.push_back(Step::Hold(i, held));
        }
        // Stage-buffer accesses are local to the stage and already part of the
        // cycle count; namespace accesses go to main memory.
        let mut at = 0;
        for a in s.accesses.iter().filter(|a| a.region == Region::Namespace) {
            steps.push_back(Step::Compute(a.cycle.saturating_sub(at)));
            at = at.max(a.cycle);
            steps.push_back(Step::Memory(words(a.bytes as usize)));
        }
        steps.push_back(Step::Compute(s.cycles.saturating_sub(at)));
        let unit = s.stage.map_or(0, |i| i + 1);
        (
            unit,
            Job {
                steps,
                done: Done::Serve(idx),
            },
        )
    }

    fn transmit_job(&self, idx: usize) -> Job {
        let w = &self.frames[idx].result.work;
        let body = w
            .service
            .as_ref()
            .filter(|s| s.stage.is_some())
            .map_or(0, |s| s.response_bytes);
        Job {
            steps: VecDeque::from([
                Step::Memory(words(body)),
                Step::Compute(stream_cycles(w.tx_bytes)),
            ]),
            done: Done::Transmit(idx),
        }
    }

    fn finish_frame(&mut self, t: u64, idx: usize, driver: &mut dyn Driver) {
        let f = &self.frames[idx];
        let conn = f.conn;
        let frames = f.result.frames.clone();
        let close = f.result.close;
        if let Some(s) = &f.result.work.service {
            self.trace.requests.push(RequestSample {
                conn,
                service: s.service,
                stage: s.stage,
                arrival: f.arrival,
                done: t,
                request_bytes: s.request_bytes,
                response_bytes: s.response_bytes,
            });
            if let Some(i) = s.stage {
                self.inflight[i] = 0;
            }
        }
        self.sync_partial(t);
        for fr in frames {
            driver.on_frame(conn, &fr);
            self.trace.responses.push((conn, fr));
        }
        let slot = self.conns.get_mut(&conn).expect("known connection");
        slot.busy = false;
        slot.ready_at = t + self.cfg.think_cycles;
        if close {
            slot.id = None;
            driver.on_close(conn);
        }
    }

    fn complete(&mut self, t: u64, done: Done, driver: &mut dyn Driver) {
        match done {
            Done::Receive(idx) => {
                if self.frames[idx].result.work.service.is_some() {
                    let (unit, job) = self.service_job(idx);
                    self.units[unit].queue.push_back(job);
                } else {
                    self.finish_frame(t, idx, driver);
                }
            }
            Done::Serve(idx) => {
                let job = self.transmit_job(idx);
                self.units[0].queue.push_back(job);
            }
            Done::Transmit(idx) => self.finish_frame(t, idx, driver),
        }
    }

    /// Moves a unit to its next timed step, running zero-time steps.
    fn advance(&mut self, u: usize, t: u64) {
        loop {
            let unit = &mut self.units[u];
            if !matches!(unit.phase, Phase::Idle | Phase::Next) {
                return;
            }
            if unit.job.is_none() {
                unit.job = unit.queue.pop_front();
                if unit.job.is_none() {
                    unit.phase = Phase::Idle;
                    return;
                }
            }
            let job = unit.job.as_mut().expect("job loaded");
            match job.steps.pop_front() {
                None => {
                    let done = job.done;
                    unit.job = None;
                    unit.phase = Phase::Idle;
                    self.completions.push(done);
                }
                Some(Step::Compute(0)) | Some(Step::Memory(0)) => {}
                Some(Step::Compute(n)) => unit.phase = Phase::Compute(n),
                Some(Step::Memory(w)) => {
                    unit.phase = match self.cfg.clock.sync_penalty {
                        0 => Phase::Wait(w),
                        p => Phase::Sync(p, w),
                    }
                }
                Some(Step::Hold(i, bytes)) => {
                    self.inflight[i] = bytes;
                    self.set_occupancy(t);
                }
            }
        }
    }

    fn record(&mut self, t: u64, u: usize, state: UnitState, grant: Option<u16>) {
        let last = if u < self.units.len() {
            &mut self.units[u].last
        } else {
            return;
        };
        if *last != Some((state, grant)) {
            *last = Some((state, grant));
            self.trace.records.push(TraceRecord {
                cycle: t,
                unit: u as u16,
                state,
                grant,
            });
        }
    }

    fn in_flight(&self) -> bool {
        self.units
            .iter()
            .any(|u| u.job.is_some() || !u.queue.is_empty() || u.phase != Phase::Idle)
    }
}

/// Runs a driver against the engine under the timing model.
pub fn run_trace(
    engine: &mut Engine,
    driver: &mut dyn Driver,
    cfg: SimConfig,
) -> Result<CycleTrace, SimError> {
    cfg.clock.validate()?;
    let stages = engine.pool().stages().len();
    let mut names = vec!["transport".to_string()];
    names.extend((0..stages).map(|i| format!("s3.{i}")));
    names.push("mem".into());
    let requesters = stages + 1;
    let mem_unit = requesters;
    let budget = engine.config().total_buffer_bytes;
    let mut sim = Sim {
        engine,
        cfg,
        units: (0..=requesters)
            .map(|_| Unit {
                queue: VecDeque::new(),
                job: None,
                phase: Phase::Idle,
                last: None,
            })
            .collect(),
        arbiter: Arbiter::new(requesters),
        frames: Vec::new(),
        conns: BTreeMap::new(),
        partial: vec![0; stages],
        inflight: vec![0; stages],
        trace: CycleTrace {
            clock: cfg.clock,
            busy: vec![0; names.len()],
            units: names,
            records: Vec::new(),
            cycles: 0,
            requests: Vec::new(),
            occupancy: vec![(0, 0)],
            buffer_budget: budget,
            responses: Vec::new(),
        },
        completions: Vec::new(),
    };
    let mut pending: Option<Next> = None;
    let mut driver_done = false;
    let mut t = 0u64;
    loop {
        if t >= cfg.max_cycles {
            return Err(SimError::CycleLimit(cfg.max_cycles));
        }
        // Client side: offer frames whose connection is ready.
        loop {
            if pending.is_none() && !driver_done {
                match driver.next() {
                    Next::Done => driver_done = true,
                    Next::Wait => {}
                    n => pending = Some(n),
                }
            }
            let conn = match &pending {
                Some(Next::Frame(c, _)) | Some(Next::Close(c)) => *c,
                _ => break,
            };
            let slot = sim.conns.entry(conn).or_default();
            if slot.busy || slot.ready_at > t {
                break;
            }
            match pending.take() {
                Some(Next::Frame(c, bytes)) => sim.arrive(t, c, bytes),
                Some(Next::Close(c)) => {
                    if let Some(id) = sim.conns.get_mut(&c).and_then(|s| s.id.take()) {
                        sim.engine.disconnect(id);
                        sim.sync_partial(t);
                    }
                    driver.on_close(c);
                }
                _ => unreachable!(),
            }
        }
        for u in 0..requesters {
            sim.advance(u, t);
        }
        if driver_done && pending.is_none() && !sim.in_flight() {
            break;
        }
        if pending.is_none()
            && !driver_done
            && !sim.in_flight()
            && sim.conns.values().all(|c| !c.busy)
        {
            // The driver waits on a response that will never come.
            return Err(SimError::Deadlock(t));
        }
        // Per-unit work for this cycle.
        let edge = cfg.clock.edge(t);
        let mut requests = vec![false; requesters];
        for u in 0..requesters {
            let (state, phase) = match sim.units[u].phase {
                Phase::Idle | Phase::Next => (UnitState::Idle, Phase::Idle),
                Phase::Compute(n) => {
                    let n = if edge { n - 1 } else { n };
                    (
                        UnitState::Busy,
                        if n == 0 {
                            Phase::Next
                        } else {
                            Phase::Compute(n)
                        },
                    )
                }
                Phase::Sync(k, w) => (
                    UnitState::Sync,
                    if k == 1 {
                        Phase::Wait(w)
                    } else {
                        Phase::Sync(k - 1, w)
                    },
                ),
                Phase::Wait(w) => {
                    requests[u] = true;
                    (UnitState::Wait, Phase::Wait(w))
                }
            };
            if state == UnitState::Busy {
                sim.trace.busy[u] += 1;
            }
            sim.units[u].phase = phase;
            sim.record(t, u, state, None);
        }
        match sim.arbiter.schedule_step(&requests) {
            Some(g) => {
                if let Phase::Wait(w) = sim.units[g].phase {
                    // Every word is its own transaction across the clock boundary.
                    sim.units[g].phase = match (w, cfg.clock.sync_penalty) {
                        (1, _) => Phase::Next,
                        (w, 0) => Phase::Wait(w - 1),
                        (w, p) => Phase::Sync(p, w - 1),
                    };
                }
                sim.trace.busy[mem_unit] += 1;
                sim.record(t, mem_unit, UnitState::Busy, Some(g as u16));
            }
            None => sim.record(t, mem_unit, UnitState::Idle, None),
        }
        t += 1;
        // Finished jobs hand over at the start of the next cycle.
        for u in 0..requesters {
            if sim.units[u].phase == Phase::Next {
                sim.advance(u, t);
            }
        }
        for done in std::mem::take(&mut sim.completions) {
            sim.complete(t, done, driver);
        }
    }
    sim.trace.cycles = t;
    Ok(sim.trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edges_follow_ratio() {
        for (f, n) in [(25, 25), (33, 33), (50, 50), (100, 100)] {
            let c = ClockConfig::at(f);
            assert_eq!((0..100).filter(|&t| c.edge(t)).count(), n);
        }
    }

    fn uniform(state: UnitState, units: usize, cycles: u64) -> CycleTrace {
        let busy = if state == UnitState::Busy { cycles } else { 0 };
        CycleTrace {
            clock: ClockConfig::default(),
            units: (0..units).map(|u| format!("u{u}")).collect(),
            records: (0..units as u16)
                .map(|unit| TraceRecord {
                    cycle: 0,
                    unit,
                    state,
                    grant: None,
                })
                .collect(),
            cycles,
            requests: Vec::new(),
            occupancy: vec![(0, 0)],
            buffer_budget: 0,
            responses: Vec::new(),
            busy: vec![busy; units],
        }
    }

    #[test]
    fn activity_bounds() {
        let idle = uniform(UnitState::Idle, 4, 100);
        assert_eq!(idle.activity(), Ok(0.0));
        assert_eq!(idle.activity_in(10..20), Ok(0.0));
        let busy = uniform(UnitState::Busy, 4, 100);
        assert_eq!(busy.activity(), Ok(1.0));
        assert_eq!(busy.activity_in(10..20), Ok(1.0));
        assert_eq!(uniform(UnitState::Wait, 2, 10).activity(), Ok(0.0));
        assert_eq!(busy.activity_in(100..200), Err(SimError::EmptyWindow));
    }

    #[test]
    fn dense_export_repeats_state() {
        let t = uniform(UnitState::Busy, 1, 3);
        let mut out = Vec::new();
        t.write_dense(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "0 u0 busy\n1 u0 busy\n2 u0 busy\n"
        );
    }

    #[test]
    fn rejects_fast_engine() {
        assert!(ClockConfig::at(200).validate().is_err());
        assert!(ClockConfig::at(0).validate().is_err());
    }
}
