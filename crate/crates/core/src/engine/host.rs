use std::collections::BTreeMap;

use log::{debug, info};

use crate::codec::{peek_request, DateTime, ServiceFault, ServiceMessage, StatusCode};
use crate::nsimage::NamespaceImage;
use crate::s3::{
    ConfigError, EngineConfig, ServiceContext, ServicePrograms, ServiceWork, StagePool,
};
use crate::transport::{
    error_frame, ChannelIdAllocator, ChunkFlag, Connection, ConnectionConfig, ConnectionState,
    Inbound, MessageChunk, Reassembly, ServerInfo, TransportError,
};

/// Handle for one client connection.
pub type ConnId = u64;

/// Wall-clock inputs for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Clock {
    pub now: DateTime,
    pub now_ms: u64,
}

/// Work performed for one inbound frame, consumed by the cycle simulator.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrameWork {
    pub rx_bytes: usize,
    pub tx_bytes: usize,
    /// Stage buffer that took the chunk body, and how many bytes.
    pub buffered: Option<(usize, usize)>,
    /// Set when the frame completed a request.
    pub service: Option<ServiceWork>,
    /// Stages released while handling the frame.
    pub freed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrameResult {
    pub frames: Vec<Vec<u8>>,
    /// The connection must be closed after sending `frames`.
    pub close: bool,
    pub work: FrameWork,
}

#[derive(Debug)]
struct Conn {
    transport: Connection,
    /// Remaining chunks of this request id are dropped.
    discarding: Option<u32>,
    /// Request handle from the first chunk of a message in a stage buffer.
    pending_handle: u32,
}

/// The engine without I/O: transport stages, S3 stages and the namespace image.
#[derive(Debug)]
pub struct Engine {
    pool: StagePool,
    image: NamespaceImage,
    programs: ServicePrograms,
    server: ServerInfo,
    channel_ids: Box<dyn ChannelIdAllocator>,
    connection_config: ConnectionConfig,
    connections: BTreeMap<ConnId, Conn>,
    next_conn: ConnId,
}

impl Engine {
    pub fn new(
        config: EngineConfig,
        image: NamespaceImage,
        programs: ServicePrograms,
        server: ServerInfo,
        channel_ids: Box<dyn ChannelIdAllocator>,
    ) -> Result<Self, ConfigError> {
        let connection_config = ConnectionConfig {
            capabilities: config.transport_limits(),
            ..ConnectionConfig::default()
        };
        Ok(Engine {
            pool: StagePool::new(config)?,
            image,
            programs,
            server,
            channel_ids,
            connection_config,
            connections: BTreeMap::new(),
            next_conn: 1,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        self.pool.config()
    }

    pub fn pool(&self) -> &StagePool {
        &self.pool
    }

    pub fn image(&self) -> &NamespaceImage {
        &self.image
    }

    pub fn connection_count(&self) -> usize {
        self.connections.len()
    }

    pub fn connect(&mut self) -> ConnId {
        let id = self.next_conn;
        self.next_conn += 1;
        self.connections.insert(
            id,
            Conn {
                transport: Connection::new(self.connection_config.clone()),
                discarding: None,
                pending_handle: 0,
            },
        );
        id
    }

    /// Largest frame the connection currently accepts.
    pub fn max_inbound_frame(&self, conn: ConnId) -> usize {
        self.connections.get(&conn).map_or(
            self.connection_config.capabilities.receive_buffer_size as usize,
            |c| c.transport.max_inbound_frame(),
        )
    }

    pub fn channel_id(&self, conn: ConnId) -> Option<u32> {
        self.connections
            .get(&conn)
            .and_then(|c| c.transport.channel_id())
    }

    /// Drops a connection and frees the stages its channel owned.
    pub fn disconnect(&mut self, conn: ConnId) -> Vec<usize> {
        let Some(c) = self.connections.remove(&conn) else {
            return Vec::new();
        };
        let freed = match c.transport.channel_id() {
            Some(ch) => self.pool.release_channel(ch),
            None => Vec::new(),
        };
        if !freed.is_empty() {
            info!("conn={conn} event=channel-closed freed={freed:?}");
        }
        freed
    }

    /// Frees sessions idle beyond their timeout.
    pub fn tick(&mut self, now_ms: u64) -> Vec<usize> {
        self.pool.expire(now_ms)
    }

    /// Processes one complete inbound frame.
    pub fn on_frame(&mut self, conn: ConnId, bytes: &[u8], clock: Clock) -> FrameResult {
        let mut out = FrameResult {
            work: FrameWork {
                rx_bytes: bytes.len(),
                ..FrameWork::default()
            },
            ..FrameResult::default()
        };
        let Some(c) = self.connections.get_mut(&conn) else {
            out.close = true;
            return out;
        };
        match c
            .transport
            .on_frame(bytes, self.channel_ids.as_ref(), clock.now)
        {
            Inbound::Reply(frames) => out.frames = frames,
            Inbound::Close(frames) => {
                out.frames = frames;
                out.close = true;
            }
            Inbound::Service(chunk) => self.on_chunk(conn, chunk, clock, &mut out),
        }
        if out.close {
            out.work.freed.extend(self.disconnect(conn));
        }
        out.work.tx_bytes = out.frames.iter().map(Vec::len).sum();
        out
    }

    fn on_chunk(&mut self, conn: ConnId, chunk: MessageChunk, clock: Clock, out: &mut FrameResult) {
        let c = self.connections.get_mut(&conn).expect("connection exists");
        let channel = c.transport.channel_id().expect("open channel");
        if let Some(id) = c.discarding {
            if id == chunk.request_id {
                if chunk.flag != ChunkFlag::Intermediate {
                    c.discarding = None;
                }
                return;
            }
            c.discarding = None;
        }
        let stage = self.route(channel, &chunk);
        let c = self.connections.get_mut(&conn).expect("connection exists");
        let body = match stage {
            Some(i) => {
                if self.pool.stage(i).pending_request().is_none() {
                    c.pending_handle = peek_request(&chunk.body).map_or(0, |p| p.2);
                }
                let handle = c.pending_handle;
                match self.pool.stage_mut(i).reassembler().push(&chunk) {
                    Ok(Reassembly::Partial) => {
                        out.work.buffered = Some((i, chunk.body.len()));
                        return;
                    }
                    Ok(Reassembly::Aborted) => return,
                    Ok(Reassembly::Complete(body)) => {
                        out.work.buffered = Some((i, chunk.body.len()));
                        body
                    }
                    Err(TransportError::MessageTooLarge) => {
                        debug!("conn={conn} stage={i} event=request-too-large");
                        if chunk.flag == ChunkFlag::Intermediate {
                            c.discarding = Some(chunk.request_id);
                        }
                        let status = StatusCode::BAD_REQUEST_TOO_LARGE;
                        self.reply_fault(conn, chunk.request_id, handle, status, clock, out);
                        return;
                    }
                    Err(e) => {
                        debug!("conn={conn} stage={i} {e}");
                        c.transport.close();
                        out.frames.push(error_frame(e.status(), e.to_string()));
                        out.close = true;
                        return;
                    }
                }
            }
            None => match chunk.flag {
                ChunkFlag::Final => chunk.body,
                ChunkFlag::Abort => return,
                ChunkFlag::Intermediate => {
                    // Only a stage owning a session buffers multi-chunk requests.
                    let handle = peek_request(&chunk.body).map_or(0, |p| p.2);
                    c.discarding = Some(chunk.request_id);
                    let status = StatusCode::BAD_REQUEST_TOO_LARGE;
                    self.reply_fault(conn, chunk.request_id, handle, status, clock, out);
                    return;
                }
            },
        };
        let mut ctx = ServiceContext {
            channel,
            now: clock.now,
            now_ms: clock.now_ms,
            server: &self.server,
            programs: &self.programs,
            store: &mut self.image,
        };
        let outcome = self.pool.handle_request(&mut ctx, &body);
        let c = self.connections.get_mut(&conn).expect("connection exists");
        match c
            .transport
            .send_message(chunk.request_id, &outcome.response)
        {
            Ok(frames) => out.frames.extend(frames),
            Err(e) => {
                debug!("conn={conn} response not sendable: {e}");
                let handle = peek_request(&body).map_or(0, |p| p.2);
                let status = StatusCode::BAD_RESPONSE_TOO_LARGE;
                self.reply_fault(conn, chunk.request_id, handle, status, clock, out);
            }
        }
        out.work.service = Some(outcome.work);
    }

    /// Stage whose buffer takes this chunk, if the request belongs to a session
    /// on this channel.
    fn route(&self, channel: u32, chunk: &MessageChunk) -> Option<usize> {
        let mine = |i: &usize| self.pool.stage(*i).channel() == Some(channel);
        let pending = (0..self.pool.stages().len())
            .filter(mine)
            .find(|&i| self.pool.stage(i).pending_request() == Some(chunk.request_id));
        if pending.is_some() {
            return pending;
        }
        let (_, token, _) = peek_request(&chunk.body).ok()?;
        self.pool.find_session(&token).filter(mine)
    }

    fn reply_fault(
        &mut self,
        conn: ConnId,
        request_id: u32,
        handle: u32,
        status: StatusCode,
        clock: Clock,
        out: &mut FrameResult,
    ) {
        let body = ServiceMessage::from(ServiceFault::new(clock.now, handle, status)).encode();
        let c = self.connections.get_mut(&conn).expect("connection exists");
        match c.transport.send_message(request_id, &body) {
            Ok(frames) => out.frames.extend(frames),
            Err(e) => {
                c.transport.close();
                out.frames.push(error_frame(e.status(), e.to_string()));
                out.close = true;
            }
        }
    }

    pub fn connection_state(&self, conn: ConnId) -> Option<ConnectionState> {
        self.connections.get(&conn).map(|c| c.transport.state())
    }
}
