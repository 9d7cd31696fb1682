use crate::codec::{
    Acknowledge, BinaryCodec, ByteString, CodecError, ErrorMessage, Hello, Reader, UaString,
    WriteExt,
};

use super::TransportError;

/// Bytes in the common chunk header: type, flag, size.
pub const HEADER_LEN: usize = 8;
/// Header plus channel id, symmetric token id and sequence header.
pub const SYMMETRIC_OVERHEAD: usize = HEADER_LEN + 4 + 4 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageType {
    Hel,
    Ack,
    Err,
    Opn,
    Clo,
    Msg,
}

impl MessageType {
    pub fn tag(self) -> &'static [u8; 3] {
        match self {
            MessageType::Hel => b"HEL",
            MessageType::Ack => b"ACK",
            MessageType::Err => b"ERR",
            MessageType::Opn => b"OPN",
            MessageType::Clo => b"CLO",
            MessageType::Msg => b"MSG",
        }
    }

    pub fn from_tag(tag: &[u8]) -> Option<Self> {
        Some(match tag {
            b"HEL" => MessageType::Hel,
            b"ACK" => MessageType::Ack,
            b"ERR" => MessageType::Err,
            b"OPN" => MessageType::Opn,
            b"CLO" => MessageType::Clo,
            b"MSG" => MessageType::Msg,
            _ => return None,
        })
    }

    pub fn is_secure(self) -> bool {
        matches!(self, MessageType::Opn | MessageType::Clo | MessageType::Msg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChunkFlag {
    Intermediate,
    Final,
    Abort,
}

impl ChunkFlag {
    pub fn byte(self) -> u8 {
        match self {
            ChunkFlag::Intermediate => b'C',
            ChunkFlag::Final => b'F',
            ChunkFlag::Abort => b'A',
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            b'C' => Some(ChunkFlag::Intermediate),
            b'F' => Some(ChunkFlag::Final),
            b'A' => Some(ChunkFlag::Abort),
            _ => None,
        }
    }
}

/// The fixed 8-byte header every frame starts with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub message_type: MessageType,
    pub flag: ChunkFlag,
    pub message_size: u32,
}

impl FrameHeader {
    pub fn parse(bytes: &[u8]) -> Result<Self, TransportError> {
        if bytes.len() < HEADER_LEN {
            return Err(TransportError::Decoding(CodecError::Truncated {
                offset: bytes.len(),
                needed: HEADER_LEN - bytes.len(),
            }));
        }
        let message_type =
            MessageType::from_tag(&bytes[..3]).ok_or(TransportError::MessageTypeInvalid)?;
        let flag = ChunkFlag::from_byte(bytes[3]).ok_or(TransportError::MessageTypeInvalid)?;
        if !message_type.is_secure() && flag != ChunkFlag::Final {
            return Err(TransportError::MessageTypeInvalid);
        }
        let message_size = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
        if (message_size as usize) < HEADER_LEN {
            return Err(TransportError::MessageTypeInvalid);
        }
        Ok(FrameHeader {
            message_type,
            flag,
            message_size,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SecurityHeader {
    Asymmetric {
        policy_uri: UaString,
        sender_certificate: ByteString,
        receiver_thumbprint: ByteString,
    },
    Symmetric {
        token_id: u32,
    },
}

impl SecurityHeader {
    pub fn none_policy() -> Self {
        SecurityHeader::Asymmetric {
            policy_uri: Some(crate::codec::SECURITY_POLICY_NONE.to_string()),
            sender_certificate: None,
            receiver_thumbprint: None,
        }
    }

    fn encoded_len(&self) -> usize {
        match self {
            SecurityHeader::Symmetric { .. } => 4,
            SecurityHeader::Asymmetric {
                policy_uri,
                sender_certificate,
                receiver_thumbprint,
            } => {
                12 + policy_uri.as_ref().map_or(0, |s| s.len())
                    + sender_certificate.as_ref().map_or(0, |b| b.len())
                    + receiver_thumbprint.as_ref().map_or(0, |b| b.len())
            }
        }
    }
}

/// One OPN, CLO or MSG chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageChunk {
    pub message_type: MessageType,
    pub flag: ChunkFlag,
    pub secure_channel_id: u32,
    pub security: SecurityHeader,
    pub sequence_number: u32,
    pub request_id: u32,
    pub body: Vec<u8>,
}

impl MessageChunk {
    /// Serialized size including all headers.
    pub fn message_size(&self) -> usize {
        HEADER_LEN + 4 + self.security.encoded_len() + 8 + self.body.len()
    }

    pub fn overhead(&self) -> usize {
        self.message_size() - self.body.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.message_size());
        out.extend_from_slice(self.message_type.tag());
        out.put_u8(self.flag.byte());
        out.put_u32(self.message_size() as u32);
        out.put_u32(self.secure_channel_id);
        match &self.security {
            SecurityHeader::Asymmetric {
                policy_uri,
                sender_certificate,
                receiver_thumbprint,
            } => {
                out.put_string(policy_uri.as_deref());
                out.put_byte_string(sender_certificate.as_deref());
                out.put_byte_string(receiver_thumbprint.as_deref());
            }
            SecurityHeader::Symmetric { token_id } => out.put_u32(*token_id),
        }
        out.put_u32(self.sequence_number);
        out.put_u32(self.request_id);
        out.extend_from_slice(&self.body);
        out
    }
}

/// A complete decoded frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Hello(Hello),
    Acknowledge(Acknowledge),
    Error(ErrorMessage),
    Chunk(MessageChunk),
}

impl Frame {
    pub fn message_type(&self) -> MessageType {
        match self {
            Frame::Hello(_) => MessageType::Hel,
            Frame::Acknowledge(_) => MessageType::Ack,
            Frame::Error(_) => MessageType::Err,
            Frame::Chunk(c) => c.message_type,
        }
    }

    /// Decodes exactly one frame; `bytes` must hold the whole frame and nothing else.
    pub fn decode(bytes: &[u8]) -> Result<Frame, TransportError> {
        let header = FrameHeader::parse(bytes)?;
        if header.message_size as usize != bytes.len() {
            return Err(TransportError::Decoding(CodecError::MalformedEncoding {
                offset: 4,
                reason: "message size does not match frame length",
            }));
        }
        let mut r = Reader::new(&bytes[HEADER_LEN..]);
        let frame = match header.message_type {
            MessageType::Hel => Frame::Hello(Hello::decode(&mut r)?),
            MessageType::Ack => Frame::Acknowledge(Acknowledge::decode(&mut r)?),
            MessageType::Err => Frame::Error(ErrorMessage::decode(&mut r)?),
            secure => {
                let secure_channel_id = r.u32()?;
                let security = if secure == MessageType::Opn {
                    SecurityHeader::Asymmetric {
                        policy_uri: r.string()?,
                        sender_certificate: r.byte_string()?,
                        receiver_thumbprint: r.byte_string()?,
                    }
                } else {
                    SecurityHeader::Symmetric { token_id: r.u32()? }
                };
                let sequence_number = r.u32()?;
                let request_id = r.u32()?;
                let body = r.rest().to_vec();
                r.bytes(body.len())?;
                Frame::Chunk(MessageChunk {
                    message_type: secure,
                    flag: header.flag,
                    secure_channel_id,
                    security,
                    sequence_number,
                    request_id,
                    body,
                })
            }
        };
        if !r.is_empty() {
            return Err(TransportError::Decoding(
                r.malformed("trailing bytes after frame body"),
            ));
        }
        Ok(frame)
    }

    pub fn encode(&self) -> Vec<u8> {
        let simple = |t: MessageType, body: Vec<u8>| {
            let mut out = Vec::with_capacity(HEADER_LEN + body.len());
            out.extend_from_slice(t.tag());
            out.put_u8(b'F');
            out.put_u32((HEADER_LEN + body.len()) as u32);
            out.extend_from_slice(&body);
            out
        };
        match self {
            Frame::Hello(h) => simple(MessageType::Hel, h.to_bytes()),
            Frame::Acknowledge(a) => simple(MessageType::Ack, a.to_bytes()),
            Frame::Error(e) => simple(MessageType::Err, e.to_bytes()),
            Frame::Chunk(c) => c.encode(),
        }
    }
}

/// Accumulates stream bytes and cuts them into frames.
#[derive(Debug, Default)]
pub struct FrameReader {
    buf: Vec<u8>,
    max_frame: usize,
}

impl FrameReader {
    pub fn new(max_frame: usize) -> Self {
        FrameReader {
            buf: Vec::new(),
            max_frame,
        }
    }

    pub fn set_max_frame(&mut self, max_frame: usize) {
        self.max_frame = max_frame;
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Returns the next complete frame, `None` if more bytes are needed.
    pub fn next_frame(&mut self) -> Result<Option<Vec<u8>>, TransportError> {
        if self.buf.len() < HEADER_LEN {
            return Ok(None);
        }
        let header = FrameHeader::parse(&self.buf)?;
        let size = header.message_size as usize;
        if size > self.max_frame {
            return Err(TransportError::MessageTooLarge);
        }
        if self.buf.len() < size {
            return Ok(None);
        }
        let rest = self.buf.split_off(size);
        Ok(Some(std::mem::replace(&mut self.buf, rest)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(body: &[u8]) -> MessageChunk {
        MessageChunk {
            message_type: MessageType::Msg,
            flag: ChunkFlag::Final,
            secure_channel_id: 7,
            security: SecurityHeader::Symmetric { token_id: 1 },
            sequence_number: 3,
            request_id: 4,
            body: body.to_vec(),
        }
    }

    #[test]
    fn msg_chunk_layout() {
        let bytes = msg(b"ab").encode();
        assert_eq!(&bytes[..8], b"MSGF\x1a\x00\x00\x00");
        assert_eq!(bytes.len(), SYMMETRIC_OVERHEAD + 2);
        assert_eq!(Frame::decode(&bytes).unwrap(), Frame::Chunk(msg(b"ab")));
    }

    #[test]
    fn opn_chunk_roundtrip() {
        let c = MessageChunk {
            message_type: MessageType::Opn,
            security: SecurityHeader::none_policy(),
            ..msg(b"xyz")
        };
        let bytes = c.encode();
        assert_eq!(bytes.len(), c.message_size());
        assert_eq!(Frame::decode(&bytes).unwrap(), Frame::Chunk(c));
    }

    #[test]
    fn bad_size_field_rejected() {
        let mut bytes = msg(b"ab").encode();
        bytes[4] = 0x30;
        assert!(Frame::decode(&bytes).is_err());
        bytes[4] = 0x02;
        assert_eq!(
            Frame::decode(&bytes),
            Err(TransportError::MessageTypeInvalid)
        );
    }

    #[test]
    fn reader_splits_stream() {
        let a = msg(b"a").encode();
        let b = msg(b"bb").encode();
        let mut fr = FrameReader::new(8192);
        let mut all = a.clone();
        all.extend_from_slice(&b);
        fr.push(&all[..5]);
        assert_eq!(fr.next_frame().unwrap(), None);
        fr.push(&all[5..]);
        assert_eq!(fr.next_frame().unwrap(), Some(a));
        assert_eq!(fr.next_frame().unwrap(), Some(b));
        assert_eq!(fr.next_frame().unwrap(), None);
    }

    #[test]
    fn reader_rejects_oversized_frame() {
        let mut fr = FrameReader::new(16);
        fr.push(&msg(b"0123456789").encode());
        assert_eq!(fr.next_frame(), Err(TransportError::MessageTooLarge));
    }
}
