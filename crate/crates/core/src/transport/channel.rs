use std::sync::atomic::{AtomicU32, Ordering};

use log::debug;

use crate::codec::{
    Acknowledge, ApplicationDescription, DateTime, EndpointDescription, ErrorMessage,
    LocalizedText, OpenSecureChannelResponse, ResponseHeader, ServiceMessage, StatusCode,
    UserTokenPolicy, SECURITY_POLICY_NONE, TRANSPORT_PROFILE_BINARY,
};

use super::chunk::{Frame, MessageChunk, MessageType, SecurityHeader};
use super::split::{split_into_chunks, ChunkTemplate};
use super::{TransportError, TransportLimits};

/// Source of secure channel ids.
pub trait ChannelIdAllocator: Send + Sync + std::fmt::Debug {
    fn next_id(&self) -> u32;
}

static GLOBAL_CHANNEL_ID: AtomicU32 = AtomicU32::new(1);

/// Process-wide allocator: ids are never reused within a run.
#[derive(Debug, Default, Clone, Copy)]
pub struct GlobalChannelIds;

impl ChannelIdAllocator for GlobalChannelIds {
    fn next_id(&self) -> u32 {
        loop {
            let id = GLOBAL_CHANNEL_ID.fetch_add(1, Ordering::Relaxed);
            if id != 0 {
                return id;
            }
        }
    }
}

/// Allocator private to one engine instance, used where runs must be reproducible.
#[derive(Debug)]
pub struct LocalChannelIds(AtomicU32);

impl Default for LocalChannelIds {
    fn default() -> Self {
        LocalChannelIds(AtomicU32::new(1))
    }
}

impl ChannelIdAllocator for LocalChannelIds {
    fn next_id(&self) -> u32 {
        self.0.fetch_add(1, Ordering::Relaxed).max(1)
    }
}

/// Identity data advertised in endpoint descriptions.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerInfo {
    pub endpoint_url: String,
    pub application_uri: String,
    pub product_uri: String,
    pub application_name: String,
}

impl Default for ServerInfo {
    fn default() -> Self {
        ServerInfo {
            endpoint_url: "opc.tcp://localhost:4840/".into(),
            application_uri: "urn:uaengine:server".into(),
            product_uri: "urn:uaengine".into(),
            application_name: "uaengine nano server".into(),
        }
    }
}

/// The single endpoint this server offers: security None, anonymous identity.
pub fn endpoint_description(info: &ServerInfo) -> EndpointDescription {
    EndpointDescription {
        endpoint_url: Some(info.endpoint_url.clone()),
        server: ApplicationDescription {
            application_uri: Some(info.application_uri.clone()),
            product_uri: Some(info.product_uri.clone()),
            application_name: LocalizedText::text(info.application_name.clone()),
            application_type: 0,
            gateway_server_uri: None,
            discovery_profile_uri: None,
            discovery_urls: vec![Some(info.endpoint_url.clone())],
        },
        server_certificate: None,
        security_mode: 1,
        security_policy_uri: Some(SECURITY_POLICY_NONE.into()),
        user_identity_tokens: vec![UserTokenPolicy {
            policy_id: Some("anonymous".into()),
            token_type: 0,
            issued_token_type: None,
            issuer_endpoint_url: None,
            security_policy_uri: None,
        }],
        transport_profile_uri: Some(TRANSPORT_PROFILE_BINARY.into()),
        security_level: 0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionConfig {
    pub capabilities: TransportLimits,
    pub max_token_lifetime_ms: u32,
}

impl Default for ConnectionConfig {
    fn default() -> Self {
        ConnectionConfig {
            capabilities: TransportLimits::default(),
            max_token_lifetime_ms: 3_600_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectionState {
    AwaitHello,
    AwaitOpen,
    Open,
    Closed,
}

impl ConnectionState {
    fn name(self) -> &'static str {
        match self {
            ConnectionState::AwaitHello => "AwaitHello",
            ConnectionState::AwaitOpen => "AwaitOpen",
            ConnectionState::Open => "Open",
            ConnectionState::Closed => "Closed",
        }
    }
}

/// What the engine must do with an inbound frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inbound {
    /// Send these frames and keep the connection.
    Reply(Vec<Vec<u8>>),
    /// A service chunk to route to an S3 stage.
    Service(MessageChunk),
    /// Send these frames, then close the connection.
    Close(Vec<Vec<u8>>),
}

#[derive(Debug, Clone)]
struct Channel {
    id: u32,
    token_id: u32,
    previous_token: Option<u32>,
    next_send_seq: u32,
    last_recv_seq: u32,
}

/// One transport stage instance, bound to one connection.
#[derive(Debug)]
pub struct Connection {
    config: ConnectionConfig,
    state: ConnectionState,
    limits: TransportLimits,
    peer_receive_buffer: u32,
    channel: Option<Channel>,
}

pub fn error_frame(status: StatusCode, reason: impl Into<String>) -> Vec<u8> {
    Frame::Error(ErrorMessage {
        error: status,
        reason: Some(reason.into()),
    })
    .encode()
}

impl Connection {
    pub fn new(config: ConnectionConfig) -> Self {
        Connection {
            limits: config.capabilities,
            peer_receive_buffer: config.capabilities.send_buffer_size,
            config,
            state: ConnectionState::AwaitHello,
            channel: None,
        }
    }

    pub fn state(&self) -> ConnectionState {
        self.state
    }

    pub fn limits(&self) -> &TransportLimits {
        &self.limits
    }

    /// Largest frame accepted from the peer.
    pub fn max_inbound_frame(&self) -> usize {
        self.limits.receive_buffer_size as usize
    }

    pub fn channel_id(&self) -> Option<u32> {
        self.channel.as_ref().map(|c| c.id)
    }

    pub fn close(&mut self) {
        self.state = ConnectionState::Closed;
    }

    fn fail(&mut self, err: TransportError) -> Inbound {
        debug!("transport error: {err}");
        self.state = ConnectionState::Closed;
        Inbound::Close(vec![error_frame(err.status(), err.to_string())])
    }

    /// Feeds one complete frame through the state machine.
    pub fn on_frame(
        &mut self,
        bytes: &[u8],
        allocator: &dyn ChannelIdAllocator,
        now: DateTime,
    ) -> Inbound {
        if self.state == ConnectionState::Closed {
            return Inbound::Close(Vec::new());
        }
        if bytes.len() > self.max_inbound_frame() {
            return self.fail(TransportError::MessageTooLarge);
        }
        let frame = match Frame::decode(bytes) {
            Ok(f) => f,
            Err(e) => return self.fail(e),
        };
        match (self.state, frame) {
            (ConnectionState::AwaitHello, Frame::Hello(h)) => {
                match self.config.capabilities.negotiate(&h) {
                    Ok(limits) => {
                        self.limits = limits;
                        self.peer_receive_buffer = h.receive_buffer_size;
                        self.state = ConnectionState::AwaitOpen;
                        let ack = Acknowledge {
                            protocol_version: limits.protocol_version,
                            receive_buffer_size: limits.receive_buffer_size,
                            send_buffer_size: limits.send_buffer_size,
                            max_message_size: limits.max_message_size,
                            max_chunk_count: limits.max_chunk_count,
                        };
                        Inbound::Reply(vec![Frame::Acknowledge(ack).encode()])
                    }
                    Err(e) => self.fail(e),
                }
            }
            (_, Frame::Chunk(c)) if self.state != ConnectionState::AwaitHello => {
                self.on_chunk(c, allocator, now)
            }
            (state, f) => {
                let name = match f.message_type() {
                    MessageType::Hel => "HEL",
                    MessageType::Ack => "ACK",
                    MessageType::Err => "ERR",
                    MessageType::Opn => "OPN",
                    MessageType::Clo => "CLO",
                    MessageType::Msg => "MSG",
                };
                self.fail(TransportError::UnexpectedMessage(name, state.name()))
            }
        }
    }

    fn check_sequence(&mut self, c: &MessageChunk) -> Result<(), TransportError> {
        if let Some(ch) = &mut self.channel {
            if c.sequence_number != ch.last_recv_seq.wrapping_add(1) {
                return Err(TransportError::SequenceNumberInvalid);
            }
            ch.last_recv_seq = c.sequence_number;
        }
        Ok(())
    }

    fn on_chunk(
        &mut self,
        c: MessageChunk,
        allocator: &dyn ChannelIdAllocator,
        now: DateTime,
    ) -> Inbound {
        match c.message_type {
            MessageType::Opn => self.on_open(c, allocator, now),
            MessageType::Clo | MessageType::Msg => {
                let Some(ch) = &self.channel else {
                    return self.fail(TransportError::SecureChannelUnknown);
                };
                if c.secure_channel_id != ch.id {
                    return self.fail(TransportError::SecureChannelIdInvalid);
                }
                let SecurityHeader::Symmetric { token_id } = c.security else {
                    return self.fail(TransportError::MessageTypeInvalid);
                };
                if token_id != ch.token_id && Some(token_id) != ch.previous_token {
                    return self.fail(TransportError::TokenUnknown);
                }
                if let Err(e) = self.check_sequence(&c) {
                    return self.fail(e);
                }
                if c.message_type == MessageType::Clo {
                    self.state = ConnectionState::Closed;
                    Inbound::Close(Vec::new())
                } else {
                    Inbound::Service(c)
                }
            }
            _ => self.fail(TransportError::MessageTypeInvalid),
        }
    }

    fn on_open(
        &mut self,
        c: MessageChunk,
        allocator: &dyn ChannelIdAllocator,
        now: DateTime,
    ) -> Inbound {
        if let SecurityHeader::Asymmetric { policy_uri, .. } = &c.security {
            if policy_uri.as_deref() != Some(crate::codec::SECURITY_POLICY_NONE) {
                return self.fail(TransportError::SecurityPolicyRejected(
                    policy_uri.clone().unwrap_or_default(),
                ));
            }
        }
        if c.flag != super::ChunkFlag::Final {
            return self.fail(TransportError::RequestTooLarge);
        }
        let req = match ServiceMessage::decode(&c.body) {
            Ok(ServiceMessage::OpenSecureChannelRequest(r)) => r,
            Ok(_) => return self.fail(TransportError::MessageTypeInvalid),
            Err(e) => return self.fail(e.into()),
        };
        if req.security_mode != 1 {
            return self.fail(TransportError::SecurityModeRejected);
        }
        let renew = req.request_type == 1;
        match (&mut self.channel, renew) {
            (None, false) => {
                self.channel = Some(Channel {
                    id: allocator.next_id(),
                    token_id: 1,
                    previous_token: None,
                    next_send_seq: 1,
                    last_recv_seq: c.sequence_number,
                });
            }
            (Some(ch), true) => {
                if c.secure_channel_id != ch.id {
                    return self.fail(TransportError::SecureChannelIdInvalid);
                }
                if c.sequence_number != ch.last_recv_seq.wrapping_add(1) {
                    return self.fail(TransportError::SequenceNumberInvalid);
                }
                ch.last_recv_seq = c.sequence_number;
                ch.previous_token = Some(ch.token_id);
                ch.token_id = ch.token_id.wrapping_add(1).max(1);
            }
            (None, true) => return self.fail(TransportError::SecureChannelUnknown),
            (Some(_), false) => return self.fail(TransportError::UnexpectedMessage("OPN", "Open")),
        }
        self.state = ConnectionState::Open;
        let lifetime = match req.requested_lifetime {
            0 => self.config.max_token_lifetime_ms,
            n => n.min(self.config.max_token_lifetime_ms),
        };
        let ch = self.channel.as_ref().expect("channel just opened");
        let resp = OpenSecureChannelResponse {
            response_header: ResponseHeader::new(
                now,
                req.request_header.request_handle,
                StatusCode::GOOD,
            ),
            server_protocol_version: 0,
            security_token: crate::codec::ChannelSecurityToken {
                channel_id: ch.id,
                token_id: ch.token_id,
                created_at: now,
                revised_lifetime: lifetime,
            },
            server_nonce: Some(Vec::new()),
        };
        let body = ServiceMessage::from(resp).encode();
        match self.send(
            MessageType::Opn,
            SecurityHeader::none_policy(),
            c.request_id,
            &body,
        ) {
            Ok(frames) => Inbound::Reply(frames),
            Err(e) => self.fail(e),
        }
    }

    fn outbound_limits(&self) -> TransportLimits {
        TransportLimits {
            send_buffer_size: self.limits.send_buffer_size.min(self.peer_receive_buffer),
            ..self.limits
        }
    }

    fn send(
        &mut self,
        message_type: MessageType,
        security: SecurityHeader,
        request_id: u32,
        body: &[u8],
    ) -> Result<Vec<Vec<u8>>, TransportError> {
        let limits = self.outbound_limits();
        let ch = self
            .channel
            .as_mut()
            .ok_or(TransportError::SecureChannelUnknown)?;
        let template = ChunkTemplate {
            message_type,
            secure_channel_id: ch.id,
            security,
            request_id,
        };
        let mut chunks = split_into_chunks(body, &limits, &template)?;
        Ok(chunks
            .iter_mut()
            .map(|c| {
                c.sequence_number = ch.next_send_seq;
                ch.next_send_seq = ch.next_send_seq.wrapping_add(1);
                c.encode()
            })
            .collect())
    }

    /// Frames a service response on the open channel.
    pub fn send_message(
        &mut self,
        request_id: u32,
        body: &[u8],
    ) -> Result<Vec<Vec<u8>>, TransportError> {
        let token_id = self
            .channel
            .as_ref()
            .ok_or(TransportError::SecureChannelUnknown)?
            .token_id;
        self.send(
            MessageType::Msg,
            SecurityHeader::Symmetric { token_id },
            request_id,
            body,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{Hello, OpenSecureChannelRequest, RequestHeader};
    use crate::transport::ChunkFlag;

    fn hello() -> Vec<u8> {
        Frame::Hello(Hello {
            protocol_version: 0,
            receive_buffer_size: 65536,
            send_buffer_size: 65536,
            max_message_size: 0,
            max_chunk_count: 0,
            endpoint_url: Some("opc.tcp://localhost:4840/".into()),
        })
        .encode()
    }

    fn opn(policy: &str) -> Vec<u8> {
        let body = ServiceMessage::from(OpenSecureChannelRequest {
            request_header: RequestHeader::default(),
            client_protocol_version: 0,
            request_type: 0,
            security_mode: 1,
            client_nonce: Some(Vec::new()),
            requested_lifetime: 600_000,
        })
        .encode();
        MessageChunk {
            message_type: MessageType::Opn,
            flag: ChunkFlag::Final,
            secure_channel_id: 0,
            security: SecurityHeader::Asymmetric {
                policy_uri: Some(policy.into()),
                sender_certificate: None,
                receiver_thumbprint: None,
            },
            sequence_number: 1,
            request_id: 1,
            body,
        }
        .encode()
    }

    fn status_of(frames: &[Vec<u8>]) -> StatusCode {
        match Frame::decode(&frames[0]).unwrap() {
            Frame::Error(e) => e.error,
            other => panic!("expected ERR, got {other:?}"),
        }
    }

    #[test]
    fn hello_then_second_hello_closes() {
        let ids = LocalChannelIds::default();
        let mut c = Connection::new(ConnectionConfig::default());
        let Inbound::Reply(ack) = c.on_frame(&hello(), &ids, DateTime(0)) else {
            panic!("no ACK")
        };
        let Frame::Acknowledge(a) = Frame::decode(&ack[0]).unwrap() else {
            panic!("not an ACK")
        };
        assert_eq!(a.receive_buffer_size, 8192);
        let Inbound::Close(err) = c.on_frame(&hello(), &ids, DateTime(0)) else {
            panic!("second HEL accepted")
        };
        assert_eq!(status_of(&err), StatusCode::BAD_TCP_MESSAGE_TYPE_INVALID);
        assert_eq!(c.state(), ConnectionState::Closed);
    }

    #[test]
    fn open_assigns_fresh_ids() {
        let ids = GlobalChannelIds;
        let mut seen = Vec::new();
        for _ in 0..3 {
            let mut c = Connection::new(ConnectionConfig::default());
            c.on_frame(&hello(), &ids, DateTime(0));
            let Inbound::Reply(resp) = c.on_frame(&opn(SECURITY_POLICY_NONE), &ids, DateTime(0))
            else {
                panic!("OPN refused")
            };
            let Frame::Chunk(chunk) = Frame::decode(&resp[0]).unwrap() else {
                panic!("not a chunk")
            };
            assert_eq!(chunk.sequence_number, 1);
            assert!(chunk.secure_channel_id > 0);
            assert!(!seen.contains(&chunk.secure_channel_id));
            seen.push(chunk.secure_channel_id);
        }
    }

    #[test]
    fn foreign_policy_rejected() {
        let ids = LocalChannelIds::default();
        let mut c = Connection::new(ConnectionConfig::default());
        c.on_frame(&hello(), &ids, DateTime(0));
        let Inbound::Close(err) = c.on_frame(
            &opn("http://opcfoundation.org/UA/SecurityPolicy#Basic256Sha256"),
            &ids,
            DateTime(0),
        ) else {
            panic!("policy accepted")
        };
        assert_eq!(status_of(&err), StatusCode::BAD_SECURITY_POLICY_REJECTED);
    }

    #[test]
    fn msg_before_open() {
        let ids = LocalChannelIds::default();
        let mut c = Connection::new(ConnectionConfig::default());
        c.on_frame(&hello(), &ids, DateTime(0));
        let msg = MessageChunk {
            message_type: MessageType::Msg,
            flag: ChunkFlag::Final,
            secure_channel_id: 5,
            security: SecurityHeader::Symmetric { token_id: 1 },
            sequence_number: 1,
            request_id: 1,
            body: vec![1, 2],
        };
        let Inbound::Close(err) = c.on_frame(&msg.encode(), &ids, DateTime(0)) else {
            panic!("MSG accepted before OPN")
        };
        assert_eq!(status_of(&err), StatusCode::BAD_TCP_SECURE_CHANNEL_UNKNOWN);
    }

    #[test]
    fn sequence_gap_closes() {
        let ids = LocalChannelIds::default();
        let mut c = Connection::new(ConnectionConfig::default());
        c.on_frame(&hello(), &ids, DateTime(0));
        c.on_frame(&opn(SECURITY_POLICY_NONE), &ids, DateTime(0));
        let id = c.channel_id().unwrap();
        let msg = |seq| MessageChunk {
            message_type: MessageType::Msg,
            flag: ChunkFlag::Final,
            secure_channel_id: id,
            security: SecurityHeader::Symmetric { token_id: 1 },
            sequence_number: seq,
            request_id: 2,
            body: vec![],
        };
        assert!(matches!(
            c.on_frame(&msg(2).encode(), &ids, DateTime(0)),
            Inbound::Service(_)
        ));
        let Inbound::Close(err) = c.on_frame(&msg(4).encode(), &ids, DateTime(0)) else {
            panic!("gap accepted")
        };
        assert_eq!(status_of(&err), StatusCode::BAD_SEQUENCE_NUMBER_INVALID);
    }
}
