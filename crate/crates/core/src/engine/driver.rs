use std::collections::VecDeque;

use crate::codec::{NodeId, ServiceMessage, Variant};

use super::client::{ClientEvent, SessionClient};

/// Next client action offered to the simulator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Next {
    Frame(u32, Vec<u8>),
    Close(u32),
    /// Every connection waits for a response.
    Wait,
    Done,
}

/// Client side of a simulated run.
pub trait Driver {
    fn next(&mut self) -> Next;
    fn on_frame(&mut self, conn: u32, frame: &[u8]);
    fn on_close(&mut self, _conn: u32) {}
}

/// One step of a scripted connection.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    CreateSession,
    ActivateSession,
    CloseSession,
    Read(Vec<NodeId>),
    Write(NodeId, Variant),
    Message(ServiceMessage),
    /// Drop the TCP connection without closing the channel.
    Disconnect,
}

impl Op {
    pub fn read(id: NodeId) -> Op {
        Op::Read(vec![id])
    }
}

/// Session setup, the given operations, then session close.
pub fn session_script(ops: impl IntoIterator<Item = Op>) -> Vec<Op> {
    let mut v = vec![Op::CreateSession, Op::ActivateSession];
    v.extend(ops);
    v.push(Op::CloseSession);
    v
}

#[derive(Debug)]
struct Scripted {
    client: SessionClient,
    ops: VecDeque<Op>,
    started: bool,
    opened: bool,
    closing: bool,
    awaiting: bool,
    done: bool,
    outbox: VecDeque<Vec<u8>>,
}

/// Drives connections through fixed scripts, taking turns among connections
/// that are not waiting for a response.
#[derive(Debug)]
pub struct ScriptDriver {
    conns: Vec<Scripted>,
    turn: usize,
    /// Responses in arrival order.
    pub responses: Vec<(u32, ServiceMessage)>,
    /// Connection-level failures: ERR frames and undecodable replies.
    pub errors: Vec<(u32, String)>,
}

impl ScriptDriver {
    pub fn new(scripts: Vec<Vec<Op>>) -> Self {
        Self::with_client(scripts, SessionClient::default())
    }

    pub fn with_client(scripts: Vec<Vec<Op>>, client: SessionClient) -> Self {
        ScriptDriver {
            conns: scripts
                .into_iter()
                .map(|ops| Scripted {
                    client: client.clone(),
                    ops: ops.into(),
                    started: false,
                    opened: false,
                    closing: false,
                    awaiting: false,
                    done: false,
                    outbox: VecDeque::new(),
                })
                .collect(),
            turn: 0,
            responses: Vec::new(),
            errors: Vec::new(),
        }
    }

    pub fn responses_for(&self, conn: u32) -> impl Iterator<Item = &ServiceMessage> {
        self.responses
            .iter()
            .filter(move |(c, _)| *c == conn)
            .map(|(_, m)| m)
    }

    fn advance(s: &mut Scripted) -> Option<Next> {
        if !s.started {
            s.started = true;
            s.awaiting = true;
            s.outbox.push_back(s.client.hello());
            return None;
        }
        if !s.opened {
            s.opened = true;
            s.awaiting = true;
            s.outbox.push_back(s.client.open());
            return None;
        }
        let Some(op) = s.ops.pop_front() else {
            s.closing = true;
            s.done = true;
            s.outbox.push_back(s.client.close_channel());
            return None;
        };
        let msg = match op {
            Op::CreateSession => s.client.create_session(),
            Op::ActivateSession => s.client.activate_session(),
            Op::CloseSession => s.client.close_session(),
            Op::Read(ids) => s.client.read(&ids),
            Op::Write(id, v) => s.client.write(&id, v),
            Op::Message(m) => m,
            Op::Disconnect => {
                s.done = true;
                return Some(Next::Done);
            }
        };
        let frames = s.client.request(&msg).expect("request frames");
        s.outbox.extend(frames);
        s.awaiting = true;
        None
    }
}

impl Driver for ScriptDriver {
    fn next(&mut self) -> Next {
        let n = self.conns.len();
        for k in 0..n {
            let i = (self.turn + k) % n;
            let s = &mut self.conns[i];
            if let Some(f) = s.outbox.pop_front() {
                self.turn = i;
                return Next::Frame(i as u32, f);
            }
            if s.awaiting || s.done {
                continue;
            }
            if let Some(Next::Done) = Self::advance(s) {
                self.turn = (i + 1) % n;
                return Next::Close(i as u32);
            }
            if let Some(f) = s.outbox.pop_front() {
                self.turn = i;
                return Next::Frame(i as u32, f);
            }
        }
        self.turn = (self.turn + 1) % n.max(1);
        if self.conns.iter().any(|s| s.awaiting && !s.done) {
            Next::Wait
        } else {
            Next::Done
        }
    }

    fn on_frame(&mut self, conn: u32, frame: &[u8]) {
        let s = &mut self.conns[conn as usize];
        match s.client.on_frame(frame) {
            Ok(ClientEvent::Partial) => {}
            Ok(ClientEvent::Response(m)) => {
                s.awaiting = false;
                self.responses.push((conn, m));
            }
            Ok(_) => s.awaiting = false,
            Err(e) => {
                s.awaiting = false;
                s.done = true;
                s.outbox.clear();
                self.errors.push((conn, e.to_string()));
            }
        }
    }

    fn on_close(&mut self, conn: u32) {
        let s = &mut self.conns[conn as usize];
        s.awaiting = false;
        s.done = true;
        s.outbox.clear();
    }
}

/// Replays recorded inbound frames without looking at responses.
#[derive(Debug, Clone)]
pub struct ReplayDriver {
    events: VecDeque<Next>,
    pub received: Vec<(u32, Vec<u8>)>,
}

impl ReplayDriver {
    pub fn new(events: impl IntoIterator<Item = Next>) -> Self {
        ReplayDriver {
            events: events.into_iter().collect(),
            received: Vec::new(),
        }
    }
}

impl Driver for ReplayDriver {
    fn next(&mut self) -> Next {
        self.events.pop_front().unwrap_or(Next::Done)
    }

    fn on_frame(&mut self, conn: u32, frame: &[u8]) {
        self.received.push((conn, frame.to_vec()));
    }
}
