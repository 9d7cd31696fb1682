//! The TCP front end.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use log::{debug, info, log_enabled, trace, warn, Level};
use thiserror::Error;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::watch;
use uaengine::codec::{DateTime, StatusCode};
use uaengine::engine::capture::{CaptureError, CaptureWriter, Direction};
use uaengine::engine::{Clock, ConnId, Engine};
use uaengine::transport::{error_frame, FrameReader, LocalChannelIds};

use crate::config::{ConfigError, ServerConfig};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("recording failed: {0}")]
    Capture(#[from] CaptureError),
}

struct State {
    engine: Engine,
    recorder: Option<CaptureWriter>,
    /// First recording failure; recording stops after it.
    record_error: Option<CaptureError>,
    connections: usize,
    next_conn: u32,
}

impl State {
    fn record(&mut self, conn: u32, direction: Direction, bytes: &[u8]) {
        let Some(w) = self.recorder.as_mut() else {
            return;
        };
        if let Err(e) = w.append(conn, direction, bytes) {
            warn!("event=record-failed error=\"{e}\"");
            self.recorder = None;
            self.record_error = Some(e);
        }
    }
}

struct Shared {
    state: Mutex<State>,
    start: Instant,
    idle: Duration,
    max_connections: usize,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn clock(&self) -> Clock {
        Clock {
            now: DateTime::now(),
            now_ms: self.start.elapsed().as_millis() as u64,
        }
    }
}

/// A bound listener with its engine.
pub struct Server {
    listener: TcpListener,
    shared: Arc<Shared>,
}

/// Builds the engine a configuration describes.
pub fn build_engine(cfg: &ServerConfig) -> Result<Engine, ConfigError> {
    let image = cfg.load_image()?;
    let programs = cfg.load_programs()?;
    Engine::new(
        cfg.engine.clone(),
        image,
        programs,
        cfg.server_info(),
        Box::new(LocalChannelIds::default()),
    )
    .map_err(|e| ConfigError::Engine(e.to_string()))
}

impl Server {
    pub async fn bind(
        cfg: &ServerConfig,
        recorder: Option<CaptureWriter>,
    ) -> Result<Self, ServerError> {
        let image = cfg.load_image()?;
        let programs = cfg.load_programs()?;
        let addr = format!("{}:{}", cfg.host, cfg.port);
        let listener = TcpListener::bind(&addr)
            .await
            .map_err(|source| ServerError::Bind { addr, source })?;
        // Advertise the port actually bound.
        let bound = ServerConfig {
            port: listener.local_addr().map_or(cfg.port, |a| a.port()),
            ..cfg.clone()
        };
        let engine = Engine::new(
            cfg.engine.clone(),
            image,
            programs,
            bound.server_info(),
            Box::new(LocalChannelIds::default()),
        )
        .map_err(|e| ConfigError::Engine(e.to_string()))?;
        Ok(Server {
            listener,
            shared: Arc::new(Shared {
                state: Mutex::new(State {
                    engine,
                    recorder,
                    record_error: None,
                    connections: 0,
                    next_conn: 0,
                }),
                start: Instant::now(),
                idle: Duration::from_secs(cfg.idle_timeout_s),
                max_connections: cfg.max_connections,
            }),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener")
    }

    /// Serves until `shutdown` resolves, then closes every connection.
    pub async fn run(self, shutdown: impl Future<Output = ()>) -> Result<(), ServerError> {
        let (stop_tx, stop_rx) = watch::channel(false);
        let mut tasks = tokio::task::JoinSet::new();
        let ticker = {
            let shared = self.shared.clone();
            let mut stop = stop_rx.clone();
            tokio::spawn(async move {
                let mut every = tokio::time::interval(Duration::from_secs(1));
                loop {
                    tokio::select! {
                        _ = every.tick() => {
                            let now = shared.start.elapsed().as_millis() as u64;
                            let freed = shared.lock().engine.tick(now);
                            if !freed.is_empty() {
                                info!("event=session-expired stages={freed:?}");
                            }
                        }
                        _ = stop.changed() => break,
                    }
                }
            })
        };
        info!("event=listening addr={}", self.local_addr());
        tokio::pin!(shutdown);
        loop {
            tokio::select! {
                _ = &mut shutdown => break,
                accepted = self.listener.accept() => {
                    let (stream, peer) = match accepted {
                        Ok(a) => a,
                        Err(e) => {
                            warn!("event=accept-failed error=\"{e}\"");
                            continue;
                        }
                    };
                    let admitted = {
                        let mut st = self.shared.lock();
                        (st.connections < self.shared.max_connections).then(|| {
                            st.connections += 1;
                            st.next_conn += 1;
                            st.next_conn - 1
                        })
                    };
                    match admitted {
                        Some(n) => {
                            tasks.spawn(connection(self.shared.clone(), stream, peer, n, stop_rx.clone()));
                        }
                        None => {
                            warn!("event=rejected peer={peer} reason=max-connections");
                            tasks.spawn(refuse(stream));
                        }
                    }
                }
                Some(_) = tasks.join_next(), if !tasks.is_empty() => {}
            }
        }
        info!(
            "event=shutdown connections={}",
            self.shared.lock().connections
        );
        let _ = stop_tx.send(true);
        while tasks.join_next().await.is_some() {}
        let _ = ticker.await;
        let mut st = self.shared.lock();
        match st.record_error.take() {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    }
}

async fn refuse(mut stream: TcpStream) {
    let frame = error_frame(StatusCode::BAD_TCP_SERVER_TOO_BUSY, "too many connections");
    let _ = stream.write_all(&frame).await;
    let _ = stream.shutdown().await;
}

enum Exit {
    Peer,
    Idle,
    Shutdown,
    Engine,
    Io(std::io::Error),
}

async fn connection(
    shared: Arc<Shared>,
    mut stream: TcpStream,
    peer: SocketAddr,
    n: u32,
    mut stop: watch::Receiver<bool>,
) {
    let _ = stream.set_nodelay(true);
    let id: ConnId = shared.lock().engine.connect();
    info!("event=connect conn={n} peer={peer}");
    let mut reader = FrameReader::new(shared.lock().engine.max_inbound_frame(id));
    let mut buf = vec![0u8; 8192];
    let exit = 'conn: loop {
        let read = tokio::select! {
            r = tokio::time::timeout(shared.idle, stream.read(&mut buf)) => r,
            _ = stop.changed() => break 'conn Exit::Shutdown,
        };
        let k = match read {
            Err(_) => break Exit::Idle,
            Ok(Ok(0)) => break Exit::Peer,
            Ok(Ok(k)) => k,
            Ok(Err(e)) => break Exit::Io(e),
        };
        reader.push(&buf[..k]);
        loop {
            let frame = match reader.next_frame() {
                Ok(Some(f)) => f,
                Ok(None) => break,
                Err(e) => {
                    debug!("event=bad-frame conn={n} error=\"{e}\"");
                    let _ = stream
                        .write_all(&error_frame(e.status(), e.to_string()))
                        .await;
                    break 'conn Exit::Engine;
                }
            };
            if log_enabled!(Level::Trace) {
                trace!("conn={n} dir=in hex={}", hex(&frame));
            }
            let (result, max) = {
                let mut st = shared.lock();
                st.record(n, Direction::In, &frame);
                let result = st.engine.on_frame(id, &frame, shared.clock());
                for out in &result.frames {
                    st.record(n, Direction::Out, out);
                }
                let max = st.engine.max_inbound_frame(id);
                (result, max)
            };
            reader.set_max_frame(max);
            for out in &result.frames {
                if log_enabled!(Level::Trace) {
                    trace!("conn={n} dir=out hex={}", hex(out));
                }
                if let Err(e) = stream.write_all(out).await {
                    break 'conn Exit::Io(e);
                }
            }
            if result.close {
                break 'conn Exit::Engine;
            }
        }
    };
    let reason = match &exit {
        Exit::Peer => "peer-closed".to_string(),
        Exit::Idle => "idle-timeout".to_string(),
        Exit::Shutdown => "shutdown".to_string(),
        Exit::Engine => "server-closed".to_string(),
        Exit::Io(e) => format!("io-error:{}", e.kind()),
    };
    let freed = {
        let mut st = shared.lock();
        st.record(n, Direction::Close, &[]);
        st.connections -= 1;
        st.engine.disconnect(id)
    };
    let _ = stream.shutdown().await;
    info!("event=disconnect conn={n} reason={reason} freed={freed:?}");
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
