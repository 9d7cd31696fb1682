use super::{ByteString, DataValue, DateTime, NodeId, RequestHeader, ServiceMessage};

fn zero_nonce(n: &mut ByteString) {
    if let Some(b) = n {
        b.iter_mut().for_each(|x| *x = 0);
    }
}

fn mask_data_value(dv: &mut DataValue) {
    dv.source_timestamp = dv.source_timestamp.map(|_| DateTime(0));
    dv.server_timestamp = dv.server_timestamp.map(|_| DateTime(0));
    dv.source_picoseconds = dv.source_picoseconds.map(|_| 0);
    dv.server_picoseconds = dv.server_picoseconds.map(|_| 0);
}

fn mask_request_header(h: &mut RequestHeader) {
    h.timestamp = DateTime(0);
    h.request_handle = 0;
    h.authentication_token = NodeId::NULL;
}

/// Replaces fields that legitimately differ between runs with fixed placeholders.
///
/// Timestamps become 0, echoed request handles 0, nonces keep their length
/// but are zeroed. Session ids, authentication tokens and secure channel
/// tokens are also replaced, because they are freshly allocated per run.
pub fn mask_volatile_fields(mut m: ServiceMessage) -> ServiceMessage {
    if let Some(h) = m.response_header_mut() {
        h.timestamp = DateTime(0);
        h.request_handle = 0;
    }
    match &mut m {
        ServiceMessage::OpenSecureChannelRequest(r) => {
            mask_request_header(&mut r.request_header);
            zero_nonce(&mut r.client_nonce);
        }
        ServiceMessage::OpenSecureChannelResponse(r) => {
            r.security_token.channel_id = 0;
            r.security_token.token_id = 0;
            r.security_token.created_at = DateTime(0);
            zero_nonce(&mut r.server_nonce);
        }
        ServiceMessage::CloseSecureChannelRequest(r) => mask_request_header(&mut r.request_header),
        ServiceMessage::GetEndpointsRequest(r) => mask_request_header(&mut r.request_header),
        ServiceMessage::CreateSessionRequest(r) => {
            mask_request_header(&mut r.request_header);
            zero_nonce(&mut r.client_nonce);
        }
        ServiceMessage::CreateSessionResponse(r) => {
            r.session_id = NodeId::NULL;
            r.authentication_token = NodeId::NULL;
            zero_nonce(&mut r.server_nonce);
        }
        ServiceMessage::ActivateSessionRequest(r) => mask_request_header(&mut r.request_header),
        ServiceMessage::ActivateSessionResponse(r) => zero_nonce(&mut r.server_nonce),
        ServiceMessage::CloseSessionRequest(r) => mask_request_header(&mut r.request_header),
        ServiceMessage::ReadRequest(r) => mask_request_header(&mut r.request_header),
        ServiceMessage::ReadResponse(r) => r.results.iter_mut().for_each(mask_data_value),
        ServiceMessage::WriteRequest(r) => {
            mask_request_header(&mut r.request_header);
            r.nodes_to_write
                .iter_mut()
                .for_each(|w| mask_data_value(&mut w.value));
        }
        ServiceMessage::GetEndpointsResponse(_)
        | ServiceMessage::CloseSessionResponse(_)
        | ServiceMessage::WriteResponse(_)
        | ServiceMessage::ServiceFault(_) => {}
    }
    m
}
