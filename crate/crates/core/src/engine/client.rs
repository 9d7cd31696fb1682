//! A minimal client-side protocol state machine without I/O, used to drive
//! the engine in simulations and tests.

use thiserror::Error;

use crate::codec::{
    ActivateSessionRequest, CloseSecureChannelRequest, CloseSessionRequest, CodecError,
    CreateSessionRequest, DataValue, DateTime, ExtensionObject, Hello, NodeId,
    OpenSecureChannelRequest, ReadRequest, ReadValueId, RequestHeader, ServiceMessage, Variant,
    WriteRequest, WriteValue,
};
use crate::transport::{
    split_into_chunks, ChunkFlag, ChunkTemplate, Frame, MessageChunk, MessageType, SecurityHeader,
    TransportError, TransportLimits, MIN_BUFFER_SIZE,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClientError {
    #[error("server sent ERR {0}")]
    ServerError(crate::codec::StatusCode),
    #[error("unexpected {0} frame")]
    Unexpected(&'static str),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// What a complete inbound frame meant to the client.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientEvent {
    Acknowledged,
    ChannelOpen,
    /// A chunk of a multi-chunk response; more follow.
    Partial,
    Response(ServiceMessage),
}

#[derive(Debug, Clone)]
pub struct SessionClient {
    pub endpoint_url: String,
    /// Largest chunk the client sends, headers included. May be below the
    /// buffer size it advertises.
    pub chunk_size: u32,
    channel_id: u32,
    token_id: u32,
    seq: u32,
    request_id: u32,
    handle: u32,
    auth_token: NodeId,
    partial: Vec<u8>,
}

impl Default for SessionClient {
    fn default() -> Self {
        SessionClient::new("opc.tcp://localhost:4840/")
    }
}

impl SessionClient {
    pub fn new(endpoint_url: &str) -> Self {
        SessionClient {
            endpoint_url: endpoint_url.into(),
            chunk_size: 8192,
            channel_id: 0,
            token_id: 0,
            seq: 0,
            request_id: 0,
            handle: 0,
            auth_token: NodeId::NULL,
            partial: Vec::new(),
        }
    }

    pub fn auth_token(&self) -> &NodeId {
        &self.auth_token
    }

    pub fn set_auth_token(&mut self, token: NodeId) {
        self.auth_token = token;
    }

    pub fn hello(&self) -> Vec<u8> {
        Frame::Hello(Hello {
            protocol_version: 0,
            receive_buffer_size: 65536,
            send_buffer_size: self.chunk_size.max(MIN_BUFFER_SIZE),
            max_message_size: 0,
            max_chunk_count: 0,
            endpoint_url: Some(self.endpoint_url.clone()),
        })
        .encode()
    }

    fn next_seq(&mut self) -> u32 {
        self.seq += 1;
        self.seq
    }

    fn next_request(&mut self) -> u32 {
        self.request_id += 1;
        self.request_id
    }

    /// Builds a request header with the session token and a fresh handle.
    pub fn header(&mut self) -> RequestHeader {
        self.handle += 1;
        RequestHeader {
            authentication_token: self.auth_token.clone(),
            timestamp: DateTime(0),
            request_handle: self.handle,
            timeout_hint: 10_000,
            ..RequestHeader::default()
        }
    }

    pub fn open(&mut self) -> Vec<u8> {
        let body = ServiceMessage::from(OpenSecureChannelRequest {
            request_header: self.header(),
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
            security: SecurityHeader::none_policy(),
            sequence_number: self.next_seq(),
            request_id: self.next_request(),
            body,
        }
        .encode()
    }

    /// Frames a request message, splitting it at `chunk_size`.
    pub fn request(&mut self, msg: &ServiceMessage) -> Result<Vec<Vec<u8>>, ClientError> {
        self.message(MessageType::Msg, &msg.encode())
    }

    /// Frames an arbitrary message body on the open channel.
    pub fn message(
        &mut self,
        message_type: MessageType,
        body: &[u8],
    ) -> Result<Vec<Vec<u8>>, ClientError> {
        let limits = TransportLimits {
            send_buffer_size: self.chunk_size.max(MIN_BUFFER_SIZE),
            max_message_size: 0,
            max_chunk_count: 0,
            ..TransportLimits::default()
        };
        let template = ChunkTemplate {
            message_type,
            secure_channel_id: self.channel_id,
            security: SecurityHeader::Symmetric {
                token_id: self.token_id,
            },
            request_id: self.next_request(),
        };
        let mut chunks = split_into_chunks(body, &limits, &template)?;
        Ok(chunks
            .iter_mut()
            .map(|c| {
                c.sequence_number = self.next_seq();
                c.encode()
            })
            .collect())
    }

    pub fn close_channel(&mut self) -> Vec<u8> {
        let body = ServiceMessage::from(CloseSecureChannelRequest {
            request_header: self.header(),
        })
        .encode();
        self.message(MessageType::Clo, &body)
            .expect("close request fits one chunk")
            .remove(0)
    }

    pub fn create_session(&mut self) -> ServiceMessage {
        CreateSessionRequest {
            request_header: self.header(),
            endpoint_url: Some(self.endpoint_url.clone()),
            session_name: Some("uaengine-client".into()),
            client_nonce: Some(vec![0; 32]),
            requested_session_timeout: 60_000.0,
            max_response_message_size: 0,
            ..CreateSessionRequest::default()
        }
        .into()
    }

    pub fn activate_session(&mut self) -> ServiceMessage {
        ActivateSessionRequest {
            request_header: self.header(),
            user_identity_token: ExtensionObject::binary(
                NodeId::numeric(0, crate::codec::encoding_id::ANONYMOUS_IDENTITY_TOKEN),
                {
                    let mut b = Vec::new();
                    crate::codec::WriteExt::put_string(&mut b, Some("anonymous"));
                    b
                },
            ),
            ..ActivateSessionRequest::default()
        }
        .into()
    }

    pub fn close_session(&mut self) -> ServiceMessage {
        CloseSessionRequest {
            request_header: self.header(),
            delete_subscriptions: true,
        }
        .into()
    }

    pub fn read(&mut self, ids: &[NodeId]) -> ServiceMessage {
        ReadRequest {
            request_header: self.header(),
            max_age: 0.0,
            timestamps_to_return: 0,
            nodes_to_read: ids
                .iter()
                .map(|id| ReadValueId {
                    node_id: id.clone(),
                    attribute_id: 13,
                    ..ReadValueId::default()
                })
                .collect(),
        }
        .into()
    }

    pub fn write(&mut self, id: &NodeId, value: Variant) -> ServiceMessage {
        WriteRequest {
            request_header: self.header(),
            nodes_to_write: vec![WriteValue {
                node_id: id.clone(),
                attribute_id: 13,
                index_range: None,
                value: DataValue::value(value),
            }],
        }
        .into()
    }

    /// Consumes one server frame.
    pub fn on_frame(&mut self, bytes: &[u8]) -> Result<ClientEvent, ClientError> {
        match Frame::decode(bytes)? {
            Frame::Acknowledge(_) => Ok(ClientEvent::Acknowledged),
            Frame::Error(e) => Err(ClientError::ServerError(e.error)),
            Frame::Hello(_) => Err(ClientError::Unexpected("HEL")),
            Frame::Chunk(c) => {
                if c.flag == ChunkFlag::Abort {
                    self.partial.clear();
                    return Ok(ClientEvent::Partial);
                }
                self.partial.extend_from_slice(&c.body);
                if c.flag == ChunkFlag::Intermediate {
                    return Ok(ClientEvent::Partial);
                }
                let msg = ServiceMessage::decode(&std::mem::take(&mut self.partial))?;
                match &msg {
                    ServiceMessage::OpenSecureChannelResponse(r) => {
                        self.channel_id = r.security_token.channel_id;
                        self.token_id = r.security_token.token_id;
                        Ok(ClientEvent::ChannelOpen)
                    }
                    ServiceMessage::CreateSessionResponse(r) => {
                        self.auth_token = r.authentication_token.clone();
                        Ok(ClientEvent::Response(msg))
                    }
                    _ => Ok(ClientEvent::Response(msg)),
                }
            }
        }
    }
}
