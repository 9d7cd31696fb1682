//! The transport stage: Hello/Acknowledge, secure channels with policy None,
//! chunk framing and reassembly.

mod channel;
mod chunk;
mod split;

pub use channel::{
    endpoint_description, error_frame, ChannelIdAllocator, Connection, ConnectionConfig,
    ConnectionState, GlobalChannelIds, Inbound, LocalChannelIds, ServerInfo,
};
pub use chunk::{
    ChunkFlag, Frame, FrameHeader, FrameReader, MessageChunk, MessageType, SecurityHeader,
    HEADER_LEN, SYMMETRIC_OVERHEAD,
};
pub use split::{reassemble, split_into_chunks, ChunkTemplate, Reassembler, Reassembly};

use thiserror::Error;

use crate::codec::{CodecError, Hello, StatusCode};

/// Smallest buffer size a peer may offer.
pub const MIN_BUFFER_SIZE: u32 = 8192;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("invalid message type or header")]
    MessageTypeInvalid,
    #[error("message exceeds the negotiated size")]
    MessageTooLarge,
    #[error("peer buffers below the {MIN_BUFFER_SIZE}-byte minimum")]
    BufferTooSmall,
    #[error("protocol version {0} unsupported")]
    ProtocolVersionUnsupported(u32),
    #[error("unexpected {0} in state {1}")]
    UnexpectedMessage(&'static str, &'static str),
    #[error("security policy rejected: {0}")]
    SecurityPolicyRejected(String),
    #[error("security mode rejected")]
    SecurityModeRejected,
    #[error("secure channel unknown")]
    SecureChannelUnknown,
    #[error("secure channel id invalid")]
    SecureChannelIdInvalid,
    #[error("security token unknown")]
    TokenUnknown,
    #[error("sequence number invalid")]
    SequenceNumberInvalid,
    #[error("message exceeds size or chunk limits")]
    RequestTooLarge,
    #[error("chunk of another request arrived while one is being assembled")]
    RequestInterleaved,
    #[error(transparent)]
    Decoding(#[from] CodecError),
}

impl TransportError {
    pub fn status(&self) -> StatusCode {
        match self {
            TransportError::MessageTypeInvalid | TransportError::UnexpectedMessage(..) => {
                StatusCode::BAD_TCP_MESSAGE_TYPE_INVALID
            }
            TransportError::MessageTooLarge | TransportError::BufferTooSmall => {
                StatusCode::BAD_TCP_MESSAGE_TOO_LARGE
            }
            TransportError::ProtocolVersionUnsupported(_) => {
                StatusCode::BAD_PROTOCOL_VERSION_UNSUPPORTED
            }
            TransportError::SecurityPolicyRejected(_) => StatusCode::BAD_SECURITY_POLICY_REJECTED,
            TransportError::SecurityModeRejected => StatusCode::BAD_SECURITY_MODE_REJECTED,
            TransportError::SecureChannelUnknown => StatusCode::BAD_TCP_SECURE_CHANNEL_UNKNOWN,
            TransportError::SecureChannelIdInvalid => StatusCode::BAD_SECURE_CHANNEL_ID_INVALID,
            TransportError::TokenUnknown => StatusCode::BAD_SECURE_CHANNEL_TOKEN_UNKNOWN,
            TransportError::SequenceNumberInvalid => StatusCode::BAD_SEQUENCE_NUMBER_INVALID,
            TransportError::RequestTooLarge => StatusCode::BAD_REQUEST_TOO_LARGE,
            TransportError::RequestInterleaved => StatusCode::BAD_TOO_MANY_OPERATIONS,
            TransportError::Decoding(e) => e.status(),
        }
    }
}

/// Buffer and message limits advertised in Hello/Acknowledge. Zero means unlimited
/// for the message size and chunk count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransportLimits {
    pub protocol_version: u32,
    pub receive_buffer_size: u32,
    pub send_buffer_size: u32,
    pub max_message_size: u32,
    pub max_chunk_count: u32,
}

impl Default for TransportLimits {
    fn default() -> Self {
        TransportLimits {
            protocol_version: 0,
            receive_buffer_size: 8192,
            send_buffer_size: 8192,
            max_message_size: 8192,
            max_chunk_count: 4,
        }
    }
}

fn min_limit(a: u32, b: u32) -> u32 {
    match (a, b) {
        (0, x) | (x, 0) => x,
        (x, y) => x.min(y),
    }
}

impl TransportLimits {
    /// Element-wise minimum of this capability set and the client's offer.
    pub fn negotiate(&self, hello: &Hello) -> Result<TransportLimits, TransportError> {
        if hello.protocol_version < self.protocol_version {
            return Err(TransportError::ProtocolVersionUnsupported(
                hello.protocol_version,
            ));
        }
        if hello.receive_buffer_size < MIN_BUFFER_SIZE || hello.send_buffer_size < MIN_BUFFER_SIZE {
            return Err(TransportError::BufferTooSmall);
        }
        Ok(TransportLimits {
            protocol_version: self.protocol_version,
            receive_buffer_size: self.receive_buffer_size.min(hello.receive_buffer_size),
            send_buffer_size: self.send_buffer_size.min(hello.send_buffer_size),
            max_message_size: min_limit(self.max_message_size, hello.max_message_size),
            max_chunk_count: min_limit(self.max_chunk_count, hello.max_chunk_count),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hello(buf: u32) -> Hello {
        Hello {
            protocol_version: 0,
            receive_buffer_size: buf,
            send_buffer_size: buf,
            max_message_size: 0,
            max_chunk_count: 0,
            endpoint_url: None,
        }
    }

    #[test]
    fn min_rule() {
        let caps = TransportLimits::default();
        let ack = caps.negotiate(&hello(65536)).unwrap();
        assert_eq!(ack.receive_buffer_size, 8192);
        assert_eq!(ack.max_chunk_count, 4);
        assert_eq!(caps.negotiate(&hello(8192)).unwrap(), caps);
    }

    #[test]
    fn small_buffers_rejected() {
        let caps = TransportLimits::default();
        assert_eq!(
            caps.negotiate(&hello(4096)).unwrap_err().status(),
            StatusCode::BAD_TCP_MESSAGE_TOO_LARGE
        );
    }
}
