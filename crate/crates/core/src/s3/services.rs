use log::{debug, warn};

use crate::codec::{
    encoding_id, message_type_id, peek_request, ActivateSessionResponse, CloseSessionResponse,
    CreateSessionResponse, DateTime, ExtensionObject, GetEndpointsResponse, NodeId, Reader,
    ResponseHeader, ServiceFault, ServiceMessage, StatusCode,
};
use crate::streamvm::{
    run_service, ImageError, MemAccess, NodeStore, Outcome, Region, Trap, VmProgram, S_RESPONSE,
};
use crate::transport::{endpoint_description, ServerInfo};

use super::{StagePool, StageState};

/// Service programs loaded into the stream processor.
#[derive(Debug, Clone, Default)]
pub struct ServicePrograms(Vec<VmProgram>);

impl ServicePrograms {
    pub fn new(programs: Vec<VmProgram>) -> Self {
        ServicePrograms(programs)
    }

    /// The read-node and write-node programs assembled at build time.
    pub fn bundled() -> Result<Self, ImageError> {
        crate::asm::bundled_programs().map(ServicePrograms)
    }

    pub fn for_service(&self, service: u32) -> Option<&VmProgram> {
        self.0
            .iter()
            .find(|p| p.entry_points.contains_key(&service))
    }

    pub fn programs(&self) -> &[VmProgram] {
        &self.0
    }
}

/// Everything a service call needs besides the stage pool.
pub struct ServiceContext<'a> {
    pub channel: u32,
    pub now: DateTime,
    pub now_ms: u64,
    pub server: &'a ServerInfo,
    pub programs: &'a ServicePrograms,
    pub store: &'a mut dyn NodeStore,
}

/// Work done to answer one request, for cycle accounting.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ServiceWork {
    /// Stage that served the request; `None` for sessionless requests.
    pub stage: Option<usize>,
    pub service: u32,
    pub cycles: u64,
    pub accesses: Vec<MemAccess>,
    pub vm: Option<Outcome>,
    pub request_bytes: usize,
    pub response_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceOutcome {
    /// Encoded response including its type id.
    pub response: Vec<u8>,
    pub work: ServiceWork,
}

fn fault(now: DateTime, handle: u32, status: StatusCode) -> ServiceMessage {
    ServiceFault::new(now, handle, status).into()
}

/// Fixed-function cost of services the stage answers without the VM: one
/// cycle per byte parsed or produced, one buffer read and one buffer write.
fn native_work(stage: Option<usize>, service: u32, request: usize, response: usize) -> ServiceWork {
    ServiceWork {
        stage,
        service,
        cycles: (request + response) as u64,
        accesses: vec![
            MemAccess {
                cycle: 0,
                region: Region::StageBuffer,
                bytes: request as u32,
                write: false,
            },
            MemAccess {
                cycle: request as u64,
                region: Region::StageBuffer,
                bytes: response as u32,
                write: true,
            },
        ],
        vm: None,
        request_bytes: request,
        response_bytes: response,
    }
}

fn finish(
    stage: Option<usize>,
    service: u32,
    request: &[u8],
    msg: ServiceMessage,
) -> ServiceOutcome {
    let response = msg.encode();
    let work = native_work(stage, service, request.len(), response.len());
    ServiceOutcome { response, work }
}

fn is_anonymous(token: &ExtensionObject) -> bool {
    token.is_null()
        || (token.type_id.namespace == 0
            && token.type_id.as_numeric() == Some(encoding_id::ANONYMOUS_IDENTITY_TOKEN))
}

impl StagePool {
    /// Routes one reassembled request body to the session or sessionless handler.
    pub fn handle_request(&mut self, ctx: &mut ServiceContext<'_>, body: &[u8]) -> ServiceOutcome {
        for i in self.expire(ctx.now_ms) {
            debug!("stage={i} event=session-timeout");
        }
        let (service, token, handle) = match peek_request(body) {
            Ok(p) => p,
            Err(e) => {
                let service = message_type_id(&mut Reader::new(body)).unwrap_or(0);
                debug!("undecodable request header: {e}");
                let msg = fault(ctx.now, 0, StatusCode::BAD_DECODING_ERROR);
                return finish(None, service, body, msg);
            }
        };
        match service {
            encoding_id::GET_ENDPOINTS_REQUEST => {
                let msg = match ServiceMessage::decode(body) {
                    Ok(_) => GetEndpointsResponse {
                        response_header: ResponseHeader::new(ctx.now, handle, StatusCode::GOOD),
                        endpoints: vec![endpoint_description(ctx.server)],
                    }
                    .into(),
                    Err(e) => fault(ctx.now, handle, e.status()),
                };
                finish(None, service, body, msg)
            }
            encoding_id::CREATE_SESSION_REQUEST => {
                let req = match ServiceMessage::decode(body) {
                    Ok(r) => r,
                    Err(e) => {
                        return finish(None, service, body, fault(ctx.now, handle, e.status()))
                    }
                };
                match self.allocate_stage(ctx.channel, ctx.now_ms) {
                    Ok(i) => {
                        let msg = self.handle_session_service(i, &req, ctx);
                        finish(Some(i), service, body, msg)
                    }
                    Err(status) => {
                        debug!(
                            "channel={} event=session-rejected status={status}",
                            ctx.channel
                        );
                        finish(None, service, body, fault(ctx.now, handle, status))
                    }
                }
            }
            encoding_id::ACTIVATE_SESSION_REQUEST
            | encoding_id::CLOSE_SESSION_REQUEST
            | encoding_id::READ_REQUEST
            | encoding_id::WRITE_REQUEST => {
                let Some(i) = self.find_session(&token) else {
                    let msg = fault(ctx.now, handle, StatusCode::BAD_SESSION_ID_INVALID);
                    return finish(None, service, body, msg);
                };
                let rebinding = service == encoding_id::ACTIVATE_SESSION_REQUEST;
                if self.stage(i).channel != ctx.channel && !rebinding {
                    let msg = fault(ctx.now, handle, StatusCode::BAD_SECURE_CHANNEL_ID_INVALID);
                    return finish(Some(i), service, body, msg);
                }
                self.stage_mut(i).last_activity_ms = ctx.now_ms;
                if matches!(
                    service,
                    encoding_id::READ_REQUEST | encoding_id::WRITE_REQUEST
                ) {
                    return self.dispatch(i, service, body, handle, ctx);
                }
                let msg = match ServiceMessage::decode(body) {
                    Ok(req) => self.handle_session_service(i, &req, ctx),
                    Err(e) => fault(ctx.now, handle, e.status()),
                };
                finish(Some(i), service, body, msg)
            }
            _ => {
                debug!("service={service} unsupported");
                let msg = fault(ctx.now, handle, StatusCode::BAD_SERVICE_UNSUPPORTED);
                finish(None, service, body, msg)
            }
        }
    }

    /// CreateSession, ActivateSession and CloseSession on an allocated stage.
    pub fn handle_session_service(
        &mut self,
        i: usize,
        req: &ServiceMessage,
        ctx: &mut ServiceContext<'_>,
    ) -> ServiceMessage {
        let handle = req.request_header().map_or(0, |h| h.request_handle);
        let header = |status| ResponseHeader::new(ctx.now, handle, status);
        match req {
            ServiceMessage::CreateSessionRequest(r) => {
                let max = self.config().max_session_timeout_ms;
                let requested = r.requested_session_timeout;
                let timeout = if requested.is_finite() && requested > 0.0 {
                    requested.min(max)
                } else {
                    max
                };
                let max_request = self.config().buffer_bytes_per_stage as u32;
                let nonce = self.nonce();
                let s = self.stage_mut(i);
                s.timeout_ms = timeout;
                s.transition(StageState::SessionCreated);
                debug!("stage={i} channel={} event=session-created", ctx.channel);
                CreateSessionResponse {
                    response_header: header(StatusCode::GOOD),
                    session_id: s.session_id.clone(),
                    authentication_token: s.authentication_token().unwrap_or(NodeId::NULL),
                    revised_session_timeout: timeout,
                    server_nonce: Some(nonce),
                    server_certificate: None,
                    server_endpoints: vec![endpoint_description(ctx.server)],
                    server_software_certificates: Vec::new(),
                    server_signature: Default::default(),
                    max_request_message_size: max_request,
                }
                .into()
            }
            ServiceMessage::ActivateSessionRequest(r) => {
                if !is_anonymous(&r.user_identity_token) {
                    return fault(ctx.now, handle, StatusCode::BAD_IDENTITY_TOKEN_REJECTED);
                }
                let nonce = self.nonce();
                let s = self.stage_mut(i);
                s.channel = ctx.channel;
                if s.state() == StageState::SessionCreated {
                    s.transition(StageState::SessionActive);
                    debug!("stage={i} event=session-activated");
                }
                ActivateSessionResponse {
                    response_header: header(StatusCode::GOOD),
                    server_nonce: Some(nonce),
                    results: Vec::new(),
                    diagnostic_infos: Vec::new(),
                }
                .into()
            }
            ServiceMessage::CloseSessionRequest(_) => {
                self.release(i);
                debug!("stage={i} event=session-closed");
                CloseSessionResponse {
                    response_header: header(StatusCode::GOOD),
                }
                .into()
            }
            _ => fault(ctx.now, handle, StatusCode::BAD_SERVICE_UNSUPPORTED),
        }
    }

    /// Runs the stream processor for a Read or Write on an active session.
    pub fn dispatch(
        &mut self,
        i: usize,
        service: u32,
        body: &[u8],
        handle: u32,
        ctx: &mut ServiceContext<'_>,
    ) -> ServiceOutcome {
        if self.stage(i).state() != StageState::SessionActive {
            let msg = fault(ctx.now, handle, StatusCode::BAD_SESSION_NOT_ACTIVATED);
            return finish(Some(i), service, body, msg);
        }
        let Some(program) = ctx.programs.for_service(service) else {
            let msg = fault(ctx.now, handle, StatusCode::BAD_SERVICE_UNSUPPORTED);
            return finish(Some(i), service, body, msg);
        };
        let mut r = Reader::new(body);
        // peek_request succeeded, so the type id decodes.
        let _ = message_type_id(&mut r);
        let request = r.rest().to_vec();
        let capacity = self.stage(i).capacity().saturating_sub(body.len());
        let context = ctx.now.0.to_le_bytes().to_vec();
        let budget = self.config().cycle_budget;
        let run = match run_service(
            program, service, request, capacity, context, ctx.store, budget,
        ) {
            Ok(run) => run,
            Err(e) => {
                warn!("stage={i} {e}");
                let msg = fault(ctx.now, handle, StatusCode::BAD_SERVICE_UNSUPPORTED);
                return finish(Some(i), service, body, msg);
            }
        };
        let response = match run.outcome {
            Outcome::Halted => run.response,
            Outcome::Trapped(Trap::StreamOverrun(S_RESPONSE)) => {
                fault(ctx.now, handle, StatusCode::BAD_RESPONSE_TOO_LARGE).encode()
            }
            other => {
                warn!("stage={i} service={service} outcome={other:?}");
                fault(ctx.now, handle, StatusCode::BAD_INTERNAL_ERROR).encode()
            }
        };
        ServiceOutcome {
            work: ServiceWork {
                stage: Some(i),
                service,
                cycles: run.cycles,
                accesses: run.accesses,
                vm: Some(run.outcome),
                request_bytes: body.len(),
                response_bytes: response.len(),
            },
            response,
        }
    }
}
