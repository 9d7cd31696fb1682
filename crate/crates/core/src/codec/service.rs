//! Service message bodies and the connection-level Hello/Acknowledge/Error bodies.

use serde::Serialize;

use super::{
    BinaryCodec, ByteString, CodecError, DataValue, DateTime, DecodeLimits, DiagnosticInfo,
    ExtensionObject, LocalizedText, NodeId, QualifiedName, Reader, StatusCode, UaString, WriteExt,
};

/// Binary encoding ids of the structures the engine understands.
pub mod encoding_id {
    pub const ANONYMOUS_IDENTITY_TOKEN: u32 = 321;
    pub const USER_NAME_IDENTITY_TOKEN: u32 = 324;
    pub const SERVICE_FAULT: u32 = 397;
    pub const GET_ENDPOINTS_REQUEST: u32 = 428;
    pub const GET_ENDPOINTS_RESPONSE: u32 = 431;
    pub const OPEN_SECURE_CHANNEL_REQUEST: u32 = 446;
    pub const OPEN_SECURE_CHANNEL_RESPONSE: u32 = 449;
    pub const CLOSE_SECURE_CHANNEL_REQUEST: u32 = 452;
    pub const CREATE_SESSION_REQUEST: u32 = 461;
    pub const CREATE_SESSION_RESPONSE: u32 = 464;
    pub const ACTIVATE_SESSION_REQUEST: u32 = 467;
    pub const ACTIVATE_SESSION_RESPONSE: u32 = 470;
    pub const CLOSE_SESSION_REQUEST: u32 = 473;
    pub const CLOSE_SESSION_RESPONSE: u32 = 476;
    pub const BROWSE_REQUEST: u32 = 527;
    pub const READ_REQUEST: u32 = 631;
    pub const READ_RESPONSE: u32 = 634;
    pub const WRITE_REQUEST: u32 = 673;
    pub const WRITE_RESPONSE: u32 = 676;
}

pub const SECURITY_POLICY_NONE: &str = "http://opcfoundation.org/UA/SecurityPolicy#None";
pub const TRANSPORT_PROFILE_BINARY: &str =
    "http://opcfoundation.org/UA-Profile/Transport/uatcp-uasc-uabinary";

macro_rules! scalar_codec {
    ($($t:ty => $put:ident, $get:ident;)*) => {
        $(impl BinaryCodec for $t {
            fn encode(&self, out: &mut Vec<u8>) {
                out.$put(*self as _);
            }

            fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
                Ok(r.$get()? as $t)
            }
        })*
    };
}

scalar_codec! {
    u8 => put_u8, u8;
    u16 => put_u16, u16;
    u32 => put_u32, u32;
    i32 => put_i32, i32;
}

impl BinaryCodec for bool {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u8(*self as u8);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(r.u8()? != 0)
    }
}

impl BinaryCodec for f64 {
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        r.f64()
    }
}

impl BinaryCodec for StatusCode {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_u32(self.0);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(StatusCode(r.u32()?))
    }
}

impl BinaryCodec for DateTime {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_i64(self.0);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(DateTime(r.i64()?))
    }
}

impl BinaryCodec for UaString {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_string(self.as_deref());
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        r.string()
    }
}

impl BinaryCodec for ByteString {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_byte_string(self.as_deref());
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        r.byte_string()
    }
}

/// Arrays; a null array decodes as empty.
impl<T: BinaryCodec> BinaryCodec for Vec<T> {
    fn encode(&self, out: &mut Vec<u8>) {
        out.put_array(self, |o, item| item.encode(o));
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        r.array_of(T::decode)
    }
}

macro_rules! ua_struct {
    ($(#[$meta:meta])* pub struct $name:ident { $(pub $field:ident: $ty:ty,)* }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Default, Serialize)]
        pub struct $name {
            $(pub $field: $ty,)*
        }

        impl BinaryCodec for $name {
            #[allow(unused_variables)]
            fn encode(&self, out: &mut Vec<u8>) {
                $(self.$field.encode(out);)*
            }

            #[allow(unused_variables)]
            fn decode(r: &mut Reader<'_>) -> Result<Self, CodecError> {
                Ok($name {
                    $($field: <$ty>::decode(r)?,)*
                })
            }
        }
    };
}

ua_struct! {
    pub struct Hello {
        pub protocol_version: u32,
        pub receive_buffer_size: u32,
        pub send_buffer_size: u32,
        pub max_message_size: u32,
        pub max_chunk_count: u32,
        pub endpoint_url: UaString,
    }
}

ua_struct! {
    pub struct Acknowledge {
        pub protocol_version: u32,
        pub receive_buffer_size: u32,
        pub send_buffer_size: u32,
        pub max_message_size: u32,
        pub max_chunk_count: u32,
    }
}

ua_struct! {
    pub struct ErrorMessage {
        pub error: StatusCode,
        pub reason: UaString,
    }
}

ua_struct! {
    pub struct RequestHeader {
        pub authentication_token: NodeId,
        pub timestamp: DateTime,
        pub request_handle: u32,
        pub return_diagnostics: u32,
        pub audit_entry_id: UaString,
        pub timeout_hint: u32,
        pub additional_header: ExtensionObject,
    }
}

ua_struct! {
    pub struct ResponseHeader {
        pub timestamp: DateTime,
        pub request_handle: u32,
        pub service_result: StatusCode,
        pub service_diagnostics: DiagnosticInfo,
        pub string_table: Vec<UaString>,
        pub additional_header: ExtensionObject,
    }
}

impl ResponseHeader {
    pub fn new(timestamp: DateTime, request_handle: u32, service_result: StatusCode) -> Self {
        ResponseHeader {
            timestamp,
            request_handle,
            service_result,
            ..ResponseHeader::default()
        }
    }
}

ua_struct! {
    pub struct ChannelSecurityToken {
        pub channel_id: u32,
        pub token_id: u32,
        pub created_at: DateTime,
        pub revised_lifetime: u32,
    }
}

ua_struct! {
    pub struct OpenSecureChannelRequest {
        pub request_header: RequestHeader,
        pub client_protocol_version: u32,
        pub request_type: u32,
        pub security_mode: u32,
        pub client_nonce: ByteString,
        pub requested_lifetime: u32,
    }
}

ua_struct! {
    pub struct OpenSecureChannelResponse {
        pub response_header: ResponseHeader,
        pub server_protocol_version: u32,
        pub security_token: ChannelSecurityToken,
        pub server_nonce: ByteString,
    }
}

ua_struct! {
    pub struct CloseSecureChannelRequest {
        pub request_header: RequestHeader,
    }
}

ua_struct! {
    pub struct ApplicationDescription {
        pub application_uri: UaString,
        pub product_uri: UaString,
        pub application_name: LocalizedText,
        pub application_type: u32,
        pub gateway_server_uri: UaString,
        pub discovery_profile_uri: UaString,
        pub discovery_urls: Vec<UaString>,
    }
}

ua_struct! {
    pub struct UserTokenPolicy {
        pub policy_id: UaString,
        pub token_type: u32,
        pub issued_token_type: UaString,
        pub issuer_endpoint_url: UaString,
        pub security_policy_uri: UaString,
    }
}

ua_struct! {
    pub struct EndpointDescription {
        pub endpoint_url: UaString,
        pub server: ApplicationDescription,
        pub server_certificate: ByteString,
        pub security_mode: u32,
        pub security_policy_uri: UaString,
        pub user_identity_tokens: Vec<UserTokenPolicy>,
        pub transport_profile_uri: UaString,
        pub security_level: u8,
    }
}

ua_struct! {
    pub struct SignatureData {
        pub algorithm: UaString,
        pub signature: ByteString,
    }
}

ua_struct! {
    pub struct SignedSoftwareCertificate {
        pub certificate_data: ByteString,
        pub signature: ByteString,
    }
}

ua_struct! {
    pub struct GetEndpointsRequest {
        pub request_header: RequestHeader,
        pub endpoint_url: UaString,
        pub locale_ids: Vec<UaString>,
        pub profile_uris: Vec<UaString>,
    }
}

ua_struct! {
    pub struct GetEndpointsResponse {
        pub response_header: ResponseHeader,
        pub endpoints: Vec<EndpointDescription>,
    }
}

ua_struct! {
    pub struct CreateSessionRequest {
        pub request_header: RequestHeader,
        pub client_description: ApplicationDescription,
        pub server_uri: UaString,
        pub endpoint_url: UaString,
        pub session_name: UaString,
        pub client_nonce: ByteString,
        pub client_certificate: ByteString,
        pub requested_session_timeout: f64,
        pub max_response_message_size: u32,
    }
}

ua_struct! {
    pub struct CreateSessionResponse {
        pub response_header: ResponseHeader,
        pub session_id: NodeId,
        pub authentication_token: NodeId,
        pub revised_session_timeout: f64,
        pub server_nonce: ByteString,
        pub server_certificate: ByteString,
        pub server_endpoints: Vec<EndpointDescription>,
        pub server_software_certificates: Vec<SignedSoftwareCertificate>,
        pub server_signature: SignatureData,
        pub max_request_message_size: u32,
    }
}

ua_struct! {
    pub struct ActivateSessionRequest {
        pub request_header: RequestHeader,
        pub client_signature: SignatureData,
        pub client_software_certificates: Vec<SignedSoftwareCertificate>,
        pub locale_ids: Vec<UaString>,
        pub user_identity_token: ExtensionObject,
        pub user_token_signature: SignatureData,
    }
}

ua_struct! {
    pub struct ActivateSessionResponse {
        pub response_header: ResponseHeader,
        pub server_nonce: ByteString,
        pub results: Vec<StatusCode>,
        pub diagnostic_infos: Vec<DiagnosticInfo>,
    }
}

ua_struct! {
    pub struct AnonymousIdentityToken {
        pub policy_id: UaString,
    }
}

ua_struct! {
    pub struct CloseSessionRequest {
        pub request_header: RequestHeader,
        pub delete_subscriptions: bool,
    }
}

ua_struct! {
    pub struct CloseSessionResponse {
        pub response_header: ResponseHeader,
    }
}

ua_struct! {
    pub struct ReadValueId {
        pub node_id: NodeId,
        pub attribute_id: u32,
        pub index_range: UaString,
        pub data_encoding: QualifiedName,
    }
}

ua_struct! {
    pub struct ReadRequest {
        pub request_header: RequestHeader,
        pub max_age: f64,
        pub timestamps_to_return: u32,
        pub nodes_to_read: Vec<ReadValueId>,
    }
}

ua_struct! {
    pub struct ReadResponse {
        pub response_header: ResponseHeader,
        pub results: Vec<DataValue>,
        pub diagnostic_infos: Vec<DiagnosticInfo>,
    }
}

ua_struct! {
    pub struct WriteValue {
        pub node_id: NodeId,
        pub attribute_id: u32,
        pub index_range: UaString,
        pub value: DataValue,
    }
}

ua_struct! {
    pub struct WriteRequest {
        pub request_header: RequestHeader,
        pub nodes_to_write: Vec<WriteValue>,
    }
}

ua_struct! {
    pub struct WriteResponse {
        pub response_header: ResponseHeader,
        pub results: Vec<StatusCode>,
        pub diagnostic_infos: Vec<DiagnosticInfo>,
    }
}

ua_struct! {
    pub struct ServiceFault {
        pub response_header: ResponseHeader,
    }
}

impl ServiceFault {
    pub fn new(timestamp: DateTime, request_handle: u32, status: StatusCode) -> Self {
        ServiceFault {
            response_header: ResponseHeader::new(timestamp, request_handle, status),
        }
    }
}

macro_rules! service_messages {
    ($($variant:ident($ty:ident) = $id:path, $kind:ident;)*) => {
        /// A service message body prefixed by its encoding NodeId.
        #[derive(Debug, Clone, PartialEq, Serialize)]
        pub enum ServiceMessage {
            $($variant($ty),)*
        }

        impl ServiceMessage {
            pub fn type_id(&self) -> u32 {
                match self {
                    $(ServiceMessage::$variant(_) => $id,)*
                }
            }

            pub fn name(&self) -> &'static str {
                match self {
                    $(ServiceMessage::$variant(_) => stringify!($ty),)*
                }
            }

            fn encode_body(&self, out: &mut Vec<u8>) {
                match self {
                    $(ServiceMessage::$variant(m) => m.encode(out),)*
                }
            }

            fn decode_body(id: u32, r: &mut Reader<'_>) -> Result<Self, CodecError> {
                match id {
                    $($id => Ok(ServiceMessage::$variant($ty::decode(r)?)),)*
                    other => Err(CodecError::UnsupportedType(format!("service type id {other}"))),
                }
            }

            pub fn request_header(&self) -> Option<&RequestHeader> {
                service_messages!(@header self, $($variant $kind,)*)
            }

            pub fn response_header(&self) -> Option<&ResponseHeader> {
                service_messages!(@response self, $($variant $kind,)*)
            }

            pub fn response_header_mut(&mut self) -> Option<&mut ResponseHeader> {
                service_messages!(@response_mut self, $($variant $kind,)*)
            }
        }

        $(impl From<$ty> for ServiceMessage {
            fn from(m: $ty) -> Self {
                ServiceMessage::$variant(m)
            }
        })*
    };
    (@header $s:ident, $($variant:ident $kind:ident,)*) => {
        match $s {
            $(ServiceMessage::$variant(m) => service_messages!(@req_field m, $kind),)*
        }
    };
    (@response $s:ident, $($variant:ident $kind:ident,)*) => {
        match $s {
            $(ServiceMessage::$variant(m) => service_messages!(@resp_field m, $kind),)*
        }
    };
    (@response_mut $s:ident, $($variant:ident $kind:ident,)*) => {
        match $s {
            $(ServiceMessage::$variant(m) => service_messages!(@resp_field_mut m, $kind),)*
        }
    };
    (@req_field $m:ident, request) => { Some(&$m.request_header) };
    (@req_field $m:ident, response) => { { let _ = $m; None } };
    (@resp_field $m:ident, response) => { Some(&$m.response_header) };
    (@resp_field $m:ident, request) => { { let _ = $m; None } };
    (@resp_field_mut $m:ident, response) => { Some(&mut $m.response_header) };
    (@resp_field_mut $m:ident, request) => { { let _ = $m; None } };
}

service_messages! {
    OpenSecureChannelRequest(OpenSecureChannelRequest) = encoding_id::OPEN_SECURE_CHANNEL_REQUEST, request;
    OpenSecureChannelResponse(OpenSecureChannelResponse) = encoding_id::OPEN_SECURE_CHANNEL_RESPONSE, response;
    CloseSecureChannelRequest(CloseSecureChannelRequest) = encoding_id::CLOSE_SECURE_CHANNEL_REQUEST, request;
    GetEndpointsRequest(GetEndpointsRequest) = encoding_id::GET_ENDPOINTS_REQUEST, request;
    GetEndpointsResponse(GetEndpointsResponse) = encoding_id::GET_ENDPOINTS_RESPONSE, response;
    CreateSessionRequest(CreateSessionRequest) = encoding_id::CREATE_SESSION_REQUEST, request;
    CreateSessionResponse(CreateSessionResponse) = encoding_id::CREATE_SESSION_RESPONSE, response;
    ActivateSessionRequest(ActivateSessionRequest) = encoding_id::ACTIVATE_SESSION_REQUEST, request;
    ActivateSessionResponse(ActivateSessionResponse) = encoding_id::ACTIVATE_SESSION_RESPONSE, response;
    CloseSessionRequest(CloseSessionRequest) = encoding_id::CLOSE_SESSION_REQUEST, request;
    CloseSessionResponse(CloseSessionResponse) = encoding_id::CLOSE_SESSION_RESPONSE, response;
    ReadRequest(ReadRequest) = encoding_id::READ_REQUEST, request;
    ReadResponse(ReadResponse) = encoding_id::READ_RESPONSE, response;
    WriteRequest(WriteRequest) = encoding_id::WRITE_REQUEST, request;
    WriteResponse(WriteResponse) = encoding_id::WRITE_RESPONSE, response;
    ServiceFault(ServiceFault) = encoding_id::SERVICE_FAULT, response;
}

impl ServiceMessage {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64);
        NodeId::numeric(0, self.type_id()).encode(&mut out);
        self.encode_body(&mut out);
        out
    }

    /// Decodes a complete message; trailing bytes are an error.
    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        Self::decode_with_limits(bytes, DecodeLimits::default())
    }

    pub fn decode_with_limits(bytes: &[u8], limits: DecodeLimits) -> Result<Self, CodecError> {
        let mut r = Reader::with_limits(bytes, limits);
        let id = message_type_id(&mut r)?;
        let msg = Self::decode_body(id, &mut r)?;
        if !r.is_empty() {
            return Err(r.malformed("trailing bytes after message body"));
        }
        Ok(msg)
    }
}

/// Reads the leading encoding NodeId of a message and returns its numeric ns=0 id.
pub fn message_type_id(r: &mut Reader<'_>) -> Result<u32, CodecError> {
    let start = r.position();
    let id = NodeId::decode(r)?;
    match (id.namespace, id.as_numeric()) {
        (0, Some(n)) => Ok(n),
        _ => Err(CodecError::MalformedEncoding {
            offset: start,
            reason: "message type id is not a numeric ns=0 NodeId",
        }),
    }
}

/// Peeks the type id and the request handle of a request without decoding the whole body.
pub fn peek_request(bytes: &[u8]) -> Result<(u32, NodeId, u32), CodecError> {
    let mut r = Reader::new(bytes);
    let id = message_type_id(&mut r)?;
    let token = NodeId::decode(&mut r)?;
    r.i64()?;
    let handle = r.u32()?;
    Ok((id, token, handle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Variant;

    fn read_request() -> ReadRequest {
        ReadRequest {
            request_header: RequestHeader {
                authentication_token: NodeId::numeric(1, 77),
                timestamp: DateTime(5),
                request_handle: 9,
                timeout_hint: 1000,
                ..RequestHeader::default()
            },
            max_age: 0.0,
            timestamps_to_return: 2,
            nodes_to_read: vec![ReadValueId {
                node_id: NodeId::numeric(1, 1003),
                attribute_id: 13,
                ..ReadValueId::default()
            }],
        }
    }

    #[test]
    fn read_request_roundtrip() {
        let msg = ServiceMessage::from(read_request());
        let bytes = msg.encode();
        assert_eq!(&bytes[..4], &[0x01, 0x00, 0x77, 0x02]);
        assert_eq!(ServiceMessage::decode(&bytes).unwrap(), msg);
        assert_eq!(
            peek_request(&bytes).unwrap(),
            (631, NodeId::numeric(1, 77), 9)
        );
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = ServiceMessage::from(read_request()).encode();
        bytes.push(0);
        assert!(matches!(
            ServiceMessage::decode(&bytes),
            Err(CodecError::MalformedEncoding { .. })
        ));
    }

    #[test]
    fn unknown_service_unsupported() {
        let mut bytes = Vec::new();
        NodeId::numeric(0, encoding_id::BROWSE_REQUEST).encode(&mut bytes);
        bytes.extend_from_slice(&[0; 40]);
        assert!(matches!(
            ServiceMessage::decode(&bytes),
            Err(CodecError::UnsupportedType(_))
        ));
    }

    #[test]
    fn read_response_header_layout() {
        let resp = ReadResponse {
            response_header: ResponseHeader::new(DateTime(1), 2, StatusCode::GOOD),
            results: vec![DataValue::value(Variant::Int32(0))],
            diagnostic_infos: vec![],
        };
        let bytes = ServiceMessage::from(resp).encode();
        // type id, timestamp, handle, result, diag mask, string table, extension object
        assert_eq!(bytes.len(), 4 + 8 + 4 + 4 + 1 + 4 + 3 + 4 + 6 + 4);
    }

    #[test]
    fn hello_roundtrip() {
        let h = Hello {
            protocol_version: 0,
            receive_buffer_size: 65536,
            send_buffer_size: 65536,
            max_message_size: 0,
            max_chunk_count: 0,
            endpoint_url: Some("opc.tcp://localhost:4840/".into()),
        };
        let bytes = h.to_bytes();
        assert_eq!(bytes.len(), 20 + 4 + 25);
        assert_eq!(Hello::from_bytes(&bytes).unwrap(), (h, bytes.len()));
    }
}
