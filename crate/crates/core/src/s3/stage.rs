use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{Identifier, NodeId, StatusCode};
use crate::transport::Reassembler;

use super::{ConfigError, EngineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StageState {
    Free,
    ChannelBound,
    SessionCreated,
    SessionActive,
}

impl StageState {
    pub fn name(self) -> &'static str {
        match self {
            StageState::Free => "free",
            StageState::ChannelBound => "channel-bound",
            StageState::SessionCreated => "session-created",
            StageState::SessionActive => "session-active",
        }
    }
}

/// One session pipeline with its bounded message buffer.
#[derive(Debug, Clone)]
pub struct S3Stage {
    pub id: usize,
    state: StageState,
    buffer: Reassembler,
    capacity: usize,
    pub(crate) token: [u8; 32],
    pub(crate) session_id: NodeId,
    pub(crate) timeout_ms: f64,
    pub(crate) channel: u32,
    pub(crate) last_activity_ms: u64,
}

impl S3Stage {
    fn new(id: usize, capacity: usize, max_chunk_count: u32) -> Self {
        S3Stage {
            id,
            state: StageState::Free,
            buffer: Reassembler::new(capacity, max_chunk_count),
            capacity,
            token: [0; 32],
            session_id: NodeId::NULL,
            timeout_ms: 0.0,
            channel: 0,
            last_activity_ms: 0,
        }
    }

    pub fn state(&self) -> StageState {
        self.state
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn channel(&self) -> Option<u32> {
        (self.state != StageState::Free).then_some(self.channel)
    }

    pub fn session_timeout_ms(&self) -> f64 {
        self.timeout_ms
    }

    /// The authentication token clients present, or `None` for a free stage.
    pub fn authentication_token(&self) -> Option<NodeId> {
        matches!(
            self.state,
            StageState::SessionCreated | StageState::SessionActive
        )
        .then(|| NodeId {
            namespace: 0,
            identifier: Identifier::ByteString(self.token.to_vec()),
        })
    }

    pub fn session_id(&self) -> &NodeId {
        &self.session_id
    }

    /// Bytes of a partially reassembled request held in the buffer.
    pub fn occupancy(&self) -> usize {
        self.buffer.occupancy()
    }

    /// Request id of a partially received multi-chunk request.
    pub fn pending_request(&self) -> Option<u32> {
        self.buffer.pending()
    }

    pub fn reassembler(&mut self) -> &mut Reassembler {
        &mut self.buffer
    }

    pub(crate) fn transition(&mut self, to: StageState) {
        use StageState::*;
        let ok = matches!(
            (self.state, to),
            (Free, ChannelBound)
                | (ChannelBound, SessionCreated)
                | (SessionCreated, SessionActive)
                | (_, Free)
        );
        assert!(ok, "illegal stage transition {:?} -> {:?}", self.state, to);
        self.state = to;
    }

    fn free(&mut self) {
        self.transition(StageState::Free);
        self.buffer.reset();
        self.token = [0; 32];
        self.session_id = NodeId::NULL;
        self.channel = 0;
        self.timeout_ms = 0.0;
    }

    fn matches_token(&self, token: &NodeId) -> bool {
        self.authentication_token().as_ref() == Some(token)
    }
}

/// The fixed set of S3 stages and the session bookkeeping around them.
#[derive(Debug)]
pub struct StagePool {
    config: EngineConfig,
    stages: Vec<S3Stage>,
    rng: ChaCha8Rng,
    sessions_created: u32,
}

impl StagePool {
    pub fn new(config: EngineConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let chunks = config.transport_limits().max_chunk_count;
        let stages = (0..config.num_stages)
            .map(|i| S3Stage::new(i, config.buffer_bytes_per_stage, chunks))
            .collect();
        let rng = match config.seed {
            Some(s) => ChaCha8Rng::seed_from_u64(s),
            None => ChaCha8Rng::from_entropy(),
        };
        Ok(StagePool {
            config,
            stages,
            rng,
            sessions_created: 0,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn stages(&self) -> &[S3Stage] {
        &self.stages
    }

    pub fn stage(&self, i: usize) -> &S3Stage {
        &self.stages[i]
    }

    pub fn stage_mut(&mut self, i: usize) -> &mut S3Stage {
        &mut self.stages[i]
    }

    pub(crate) fn nonce(&mut self) -> Vec<u8> {
        let mut n = vec![0; 32];
        self.rng.fill_bytes(&mut n);
        n
    }

    /// Binds the lowest-index free stage to `channel`.
    pub fn allocate_stage(&mut self, channel: u32, now_ms: u64) -> Result<usize, StatusCode> {
        let slots = self.config.session_slots();
        let i = self.stages[..slots]
            .iter()
            .position(|s| s.state == StageState::Free)
            .ok_or(StatusCode::BAD_TOO_MANY_SESSIONS)?;
        let mut token = [0; 32];
        self.rng.fill_bytes(&mut token);
        self.sessions_created += 1;
        let s = &mut self.stages[i];
        s.transition(StageState::ChannelBound);
        s.token = token;
        s.session_id = NodeId::numeric(1, 0x4000_0000 + self.sessions_created);
        s.channel = channel;
        s.last_activity_ms = now_ms;
        Ok(i)
    }

    pub fn find_session(&self, token: &NodeId) -> Option<usize> {
        self.stages.iter().position(|s| s.matches_token(token))
    }

    /// First stage bound to `channel`, if any.
    pub fn stage_for_channel(&self, channel: u32) -> Option<usize> {
        self.stages
            .iter()
            .position(|s| s.state != StageState::Free && s.channel == channel)
    }

    pub fn release(&mut self, i: usize) {
        self.stages[i].free();
    }

    /// Frees every stage owned by a closing channel.
    pub fn release_channel(&mut self, channel: u32) -> Vec<usize> {
        let mut freed = Vec::new();
        for s in &mut self.stages {
            if s.state != StageState::Free && s.channel == channel {
                s.free();
                freed.push(s.id);
            }
        }
        freed
    }

    /// Frees stages whose session saw no traffic for its timeout.
    pub fn expire(&mut self, now_ms: u64) -> Vec<usize> {
        let mut freed = Vec::new();
        for s in &mut self.stages {
            let idle = now_ms.saturating_sub(s.last_activity_ms) as f64;
            if s.state != StageState::Free && s.timeout_ms > 0.0 && idle > s.timeout_ms {
                s.free();
                freed.push(s.id);
            }
        }
        freed
    }

    /// Bytes held in all stage buffers.
    pub fn occupancy(&self) -> usize {
        self.stages.iter().map(S3Stage::occupancy).sum()
    }

    pub fn active_sessions(&self) -> usize {
        self.stages
            .iter()
            .filter(|s| s.state != StageState::Free)
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(n: usize) -> StagePool {
        StagePool::new(EngineConfig {
            num_stages: n,
            ..EngineConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn lowest_free_first() {
        let mut p = pool(3);
        assert_eq!(p.allocate_stage(7, 0), Ok(0));
        assert_eq!(p.allocate_stage(8, 0), Ok(1));
        assert_eq!(p.allocate_stage(9, 0), Ok(2));
        assert_eq!(
            p.allocate_stage(10, 0),
            Err(StatusCode::BAD_TOO_MANY_SESSIONS)
        );
        p.release(1);
        assert_eq!(p.allocate_stage(11, 0), Ok(1));
    }

    #[test]
    fn capacity_matches_stage_count() {
        for n in 1..=3 {
            let mut p = pool(n);
            for k in 0..n {
                assert_eq!(p.allocate_stage(k as u32 + 1, 0), Ok(k));
            }
            assert_eq!(
                p.allocate_stage(99, 0),
                Err(StatusCode::BAD_TOO_MANY_SESSIONS)
            );
        }
    }

    #[test]
    fn channel_close_frees() {
        let mut p = pool(3);
        p.allocate_stage(5, 0).unwrap();
        p.allocate_stage(6, 0).unwrap();
        assert_eq!(p.release_channel(5), vec![0]);
        assert_eq!(p.stage(0).state(), StageState::Free);
        assert_eq!(p.stage_for_channel(6), Some(1));
    }

    #[test]
    fn tokens_are_distinct_and_seeded() {
        let mut a = pool(3);
        let mut b = pool(3);
        for p in [&mut a, &mut b] {
            for c in 1..=3 {
                let i = p.allocate_stage(c, 0).unwrap();
                p.stage_mut(i).transition(StageState::SessionCreated);
            }
        }
        let ta: Vec<_> = a
            .stages()
            .iter()
            .map(|s| s.authentication_token())
            .collect();
        let tb: Vec<_> = b
            .stages()
            .iter()
            .map(|s| s.authentication_token())
            .collect();
        assert_eq!(ta, tb);
        assert_ne!(ta[0], ta[1]);
        assert_eq!(a.find_session(ta[2].as_ref().unwrap()), Some(2));
    }

    #[test]
    fn idle_sessions_expire() {
        let mut p = pool(1);
        let i = p.allocate_stage(1, 100).unwrap();
        p.stage_mut(i).timeout_ms = 50.0;
        assert!(p.expire(150).is_empty());
        assert_eq!(p.expire(151), vec![0]);
    }

    #[test]
    #[should_panic(expected = "illegal stage transition")]
    fn no_skipping_states() {
        let mut p = pool(1);
        p.stage_mut(0).transition(StageState::SessionActive);
    }
}
