use super::chunk::{ChunkFlag, MessageChunk, MessageType, SecurityHeader};
use super::{TransportError, TransportLimits};

/// Fields shared by every chunk of one outgoing message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkTemplate {
    pub message_type: MessageType,
    pub secure_channel_id: u32,
    pub security: SecurityHeader,
    pub request_id: u32,
}

impl ChunkTemplate {
    fn chunk(&self, flag: ChunkFlag, body: Vec<u8>) -> MessageChunk {
        MessageChunk {
            message_type: self.message_type,
            flag,
            secure_channel_id: self.secure_channel_id,
            security: self.security.clone(),
            sequence_number: 0,
            request_id: self.request_id,
            body,
        }
    }
}

fn unlimited(v: u32) -> usize {
    if v == 0 {
        usize::MAX
    } else {
        v as usize
    }
}

/// Splits a message body into maximal chunks; sequence numbers are left at 0
/// for the channel to assign.
pub fn split_into_chunks(
    msg: &[u8],
    limits: &TransportLimits,
    template: &ChunkTemplate,
) -> Result<Vec<MessageChunk>, TransportError> {
    if msg.len() > unlimited(limits.max_message_size) {
        return Err(TransportError::RequestTooLarge);
    }
    let overhead = template.chunk(ChunkFlag::Final, Vec::new()).overhead();
    let capacity = unlimited(limits.send_buffer_size).saturating_sub(overhead);
    if capacity == 0 {
        return Err(TransportError::RequestTooLarge);
    }
    let count = msg.len().div_ceil(capacity).max(1);
    if count > unlimited(limits.max_chunk_count) {
        return Err(TransportError::RequestTooLarge);
    }
    if msg.is_empty() {
        return Ok(vec![template.chunk(ChunkFlag::Final, Vec::new())]);
    }
    let pieces: Vec<&[u8]> = msg.chunks(capacity).collect();
    let last = pieces.len() - 1;
    Ok(pieces
        .into_iter()
        .enumerate()
        .map(|(i, body)| {
            let flag = if i == last {
                ChunkFlag::Final
            } else {
                ChunkFlag::Intermediate
            };
            template.chunk(flag, body.to_vec())
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reassembly {
    Partial,
    Complete(Vec<u8>),
    Aborted,
}

/// Collects chunk bodies of one request into a bounded buffer.
#[derive(Debug, Clone)]
pub struct Reassembler {
    capacity: usize,
    max_chunks: usize,
    buf: Vec<u8>,
    chunks: usize,
    request_id: Option<u32>,
}

impl Reassembler {
    pub fn new(capacity: usize, max_chunk_count: u32) -> Self {
        Reassembler {
            capacity,
            max_chunks: unlimited(max_chunk_count),
            buf: Vec::new(),
            chunks: 0,
            request_id: None,
        }
    }

    /// Request id of the message being assembled, if any.
    pub fn pending(&self) -> Option<u32> {
        self.request_id
    }

    pub fn occupancy(&self) -> usize {
        self.buf.len()
    }

    pub fn reset(&mut self) {
        self.buf.clear();
        self.chunks = 0;
        self.request_id = None;
    }

    /// Appends a chunk. On overflow the partial message is discarded.
    pub fn push(&mut self, chunk: &MessageChunk) -> Result<Reassembly, TransportError> {
        if chunk.flag == ChunkFlag::Abort {
            self.reset();
            return Ok(Reassembly::Aborted);
        }
        if self.request_id.is_some_and(|id| id != chunk.request_id) {
            return Err(TransportError::RequestInterleaved);
        }
        if self.buf.len() + chunk.body.len() > self.capacity || self.chunks + 1 > self.max_chunks {
            self.reset();
            return Err(TransportError::MessageTooLarge);
        }
        self.request_id = Some(chunk.request_id);
        self.buf.extend_from_slice(&chunk.body);
        self.chunks += 1;
        if chunk.flag == ChunkFlag::Final {
            let out = std::mem::take(&mut self.buf);
            self.reset();
            Ok(Reassembly::Complete(out))
        } else {
            Ok(Reassembly::Partial)
        }
    }
}

/// Reassembles a complete chunk sequence, checking that sequence numbers step by one.
///
/// Returns `None` when the sequence ends in an abort or without a final chunk.
pub fn reassemble(
    chunks: impl IntoIterator<Item = MessageChunk>,
    capacity: usize,
) -> Result<Option<Vec<u8>>, TransportError> {
    let mut r = Reassembler::new(capacity, 0);
    let mut last_seq: Option<u32> = None;
    let mut done = None;
    for c in chunks {
        if last_seq.is_some_and(|s| c.sequence_number != s.wrapping_add(1)) {
            return Err(TransportError::SequenceNumberInvalid);
        }
        last_seq = Some(c.sequence_number);
        match r.push(&c)? {
            Reassembly::Complete(m) => done = Some(m),
            Reassembly::Aborted => done = None,
            Reassembly::Partial => {}
        }
    }
    Ok(done)
}
