//! The networked session.
//!
//! - UDP tracker ingest (binary pose frames and handshake lines).
//! - `GET /ws[?version=N]`: WebSocket stream of `config` then `frame`
//!   messages. A client that falls more than `network.client_queue` frames
//!   behind is sent an `error` and disconnected; one whose socket stops
//!   draining is disconnected without the error.
//! - `POST /simulated-pose`: one JSON pose message or an array of them, fed
//!   through the same path as UDP datagrams.
//! - `POST /what-if`: evaluates hypothetical poses and screen sizes against
//!   the live snapshot without affecting the session.
//! - `GET /config`, `GET /frame`, `GET /health`.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use arc_swap::ArcSwapOption;
use axum::extract::ws::{Message, Utf8Bytes, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use nalgebra::{Quaternion, Vector3};
use serde::{Deserialize, Serialize};
use silhouette_core::analysis::{panel_dims, EventFlag};
use silhouette_core::{EntityId, Pose};
use silhouette_pose_io::ingest::IngestStats;
use silhouette_pose_io::{IngestOutcome, PoseMessage, PoseStore};
use tokio::net::{TcpListener, UdpSocket};
use tokio::sync::{broadcast, watch, Notify};
use tokio::task::JoinHandle;
use tokio::time::Instant;

use crate::engine::{what_if, Session};
use crate::frame::{FrameUpdate, ServerMessage, PROTOCOL_VERSION};
use crate::pipeline::{drain, IngestPipeline};
use crate::{SessionClock, SessionConfig, SessionError};

/// A pose arriving at least this fraction of a period after the last tick
/// triggers the next tick immediately.
const EARLY_TICK_FRACTION: f64 = 0.8;
/// Extra wait past the period while poses are flowing, so that a pose due
/// right at the period boundary still triggers its own tick.
const LATE_TICK_FRACTION: f64 = 0.15;
/// Wait after a triggering pose so that poses sent together share a tick.
const COALESCE: Duration = Duration::from_millis(1);
/// Lower bound on how long one frame send may block before the client is
/// dropped as a slow consumer.
const MIN_SEND_BUDGET: Duration = Duration::from_millis(100);

struct Latest {
    frame: FrameUpdate,
    json: Utf8Bytes,
}

struct Shared {
    config: SessionConfig,
    clock: SessionClock,
    store: Arc<PoseStore>,
    pipeline: Mutex<IngestPipeline>,
    pose_arrived: Notify,
    frames: broadcast::Sender<(u64, Utf8Bytes)>,
    latest: ArcSwapOption<Latest>,
    clients: AtomicUsize,
    stop: watch::Receiver<bool>,
}

impl Shared {
    fn ingest_datagram(&self, bytes: &[u8]) {
        let now = self.clock.now_us();
        let outcome = self.pipeline.lock().expect("pipeline lock").datagram(bytes, now);
        match outcome {
            Ok(IngestOutcome::Accepted(_)) => self.pose_arrived.notify_one(),
            Ok(_) => {}
            Err(e) => log::debug!("rejected datagram: {e}"),
        }
    }
}

/// Handle to a running session. Dropping it does not stop the session; call
/// [`ServerHandle::shutdown`].
pub struct ServerHandle {
    pub ingest_addr: SocketAddr,
    pub http_addr: SocketAddr,
    shared: Arc<Shared>,
    stop: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn clock(&self) -> SessionClock {
        self.shared.clock
    }

    pub fn latest_frame(&self) -> Option<FrameUpdate> {
        self.shared.latest.load().as_ref().map(|l| l.frame.clone())
    }

    pub fn subscribe(&self) -> broadcast::Receiver<(u64, Utf8Bytes)> {
        self.shared.frames.subscribe()
    }

    pub fn clients(&self) -> usize {
        self.shared.clients.load(Ordering::Relaxed)
    }

    pub fn ingest_stats(&self) -> IngestStats {
        self.shared.pipeline.lock().expect("pipeline lock").ingestor().stats()
    }

    /// Feeds a pose as if it had just arrived, stamped with the session clock.
    pub fn inject(&self, pose: &Pose) {
        let pose = Pose { timestamp_us: self.shared.clock.now_us(), ..*pose };
        self.shared.pipeline.lock().expect("pipeline lock").pose(&pose);
        self.shared.pose_arrived.notify_one();
    }

    pub async fn shutdown(self) {
        let _ = self.stop.send(true);
        for t in self.tasks {
            let _ = t.await;
        }
    }

    /// Resolves when the session stops for any reason.
    pub async fn stopped(&mut self) {
        for t in self.tasks.drain(..) {
            let _ = t.await;
        }
    }
}

/// Binds both ports and starts ingest, tick loop and HTTP server.
pub async fn serve(config: SessionConfig) -> Result<ServerHandle, SessionError> {
    config.validate()?;
    let net = &config.network;
    let ingest_addr = SocketAddr::new(net.bind, net.ingest_port);
    let udp = UdpSocket::bind(ingest_addr).await.map_err(|source| SessionError::Bind {
        what: "tracker ingest",
        addr: ingest_addr,
        source,
    })?;
    let http_addr = SocketAddr::new(net.bind, net.serve_port);
    let tcp = TcpListener::bind(http_addr).await.map_err(|source| SessionError::Bind {
        what: "frame server",
        addr: http_addr,
        source,
    })?;
    let (ingest_addr, http_addr) = (udp.local_addr()?, tcp.local_addr()?);

    let store = Arc::new(PoseStore::new());
    let (pipeline, events) = IngestPipeline::new(&config, store.clone())?;
    let (frames, _) = broadcast::channel(net.client_queue);
    let (stop, stop_rx) = watch::channel(false);
    let shared = Arc::new(Shared {
        config: config.clone(),
        clock: SessionClock::new(),
        store,
        pipeline: Mutex::new(pipeline),
        pose_arrived: Notify::new(),
        frames,
        latest: ArcSwapOption::empty(),
        clients: AtomicUsize::new(0),
        stop: stop_rx.clone(),
    });
    let tasks = vec![
        tokio::spawn(ingest_loop(udp, shared.clone(), stop_rx.clone())),
        tokio::spawn(tick_loop(shared.clone(), events, stop_rx.clone())),
        tokio::spawn(http_server(tcp, shared.clone(), stop_rx)),
    ];
    log::info!("tracker ingest on udp://{ingest_addr}, frames on ws://{http_addr}/ws");
    Ok(ServerHandle { ingest_addr, http_addr, shared, stop, tasks })
}

async fn stopped(mut rx: watch::Receiver<bool>) {
    let _ = rx.wait_for(|s| *s).await;
}

async fn ingest_loop(udp: UdpSocket, shared: Arc<Shared>, stop: watch::Receiver<bool>) {
    let mut buf = [0u8; 2048];
    let stop = stopped(stop);
    tokio::pin!(stop);
    loop {
        tokio::select! {
            _ = &mut stop => break,
            received = udp.recv_from(&mut buf) => match received {
                Ok((n, _)) => shared.ingest_datagram(&buf[..n]),
                Err(e) => log::warn!("ingest socket: {e}"),
            },
        }
    }
}

async fn tick_loop(shared: Arc<Shared>, events: std::sync::mpsc::Receiver<EventFlag>, stop: watch::Receiver<bool>) {
    let period = Duration::from_micros(shared.config.tick_period_us());
    let mut session = Session::new(shared.config.clone());
    // Tick phase. Pose-triggered ticks advance it by one period so that a
    // single late pose does not push the phase back; it only follows
    // arrivals that are more than half a period late.
    let mut anchor = Instant::now();
    let mut last_pose: Option<Instant> = None;
    let stop = stopped(stop);
    tokio::pin!(stop);
    loop {
        let flowing = last_pose.is_some_and(|t| t.elapsed() < 2 * period);
        let deadline = anchor + period.mul_f64(if flowing { 1.0 + LATE_TICK_FRACTION } else { 1.0 });
        tokio::select! {
            _ = &mut stop => break,
            _ = tokio::time::sleep_until(deadline) => {
                // Skip missed ticks after a stall instead of bursting.
                anchor = if deadline.elapsed() > period { Instant::now() } else { deadline };
            }
            _ = shared.pose_arrived.notified() => {
                let now = Instant::now();
                last_pose = Some(now);
                if now.saturating_duration_since(anchor) < period.mul_f64(EARLY_TICK_FRACTION) {
                    continue;
                }
                anchor = (anchor + period).max(now - period / 2);
                tokio::time::sleep(COALESCE).await;
            }
        }
        let snapshot = shared.store.snapshot();
        let frame = session.tick(&snapshot.poses, shared.clock.now_us(), drain(&events));
        let json = Utf8Bytes::from(ServerMessage::Frame(Box::new(frame.clone())).to_json());
        let tick = frame.tick;
        shared.latest.store(Some(Arc::new(Latest { frame, json: json.clone() })));
        // No receivers is fine: frames are state, late joiners get `latest`.
        let _ = shared.frames.send((tick, json));
    }
}

async fn http_server(tcp: TcpListener, shared: Arc<Shared>, stop: watch::Receiver<bool>) {
    let app = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/simulated-pose", post(simulated_pose))
        .route("/what-if", post(what_if_handler))
        .route("/config", get(|State(s): State<Arc<Shared>>| async move { Json(s.config.clone()) }))
        .route("/frame", get(latest_frame))
        .route("/health", get(health))
        .with_state(shared.clone());
    let server = axum::serve(tcp, app).with_graceful_shutdown(stopped(stop));
    if let Err(e) = server.await {
        log::error!("frame server: {e}");
    }
}

#[derive(Debug, Deserialize)]
struct WsQuery {
    version: Option<u32>,
}

async fn ws_upgrade(ws: WebSocketUpgrade, Query(q): Query<WsQuery>, State(shared): State<Arc<Shared>>) -> Response {
    ws.on_upgrade(move |socket| client(socket, q.version, shared))
}

fn error_message(code: &str, message: String) -> Message {
    Message::Text(ServerMessage::Error { code: code.into(), message }.to_json().into())
}

async fn client(mut socket: WebSocket, version: Option<u32>, shared: Arc<Shared>) {
    if let Some(v) = version.filter(|v| *v != PROTOCOL_VERSION) {
        let _ = socket
            .send(error_message(
                "version_mismatch",
                format!("client speaks protocol {v}, server speaks {PROTOCOL_VERSION}"),
            ))
            .await;
        let _ = socket.send(Message::Close(None)).await;
        return;
    }
    shared.clients.fetch_add(1, Ordering::Relaxed);
    // Subscribe before reading `latest` so no frame falls between the two.
    let mut frames = shared.frames.subscribe();
    let latest = shared.latest.load_full();
    let config = ServerMessage::Config {
        protocol_version: PROTOCOL_VERSION,
        tick: latest.as_ref().map_or(0, |l| l.frame.tick),
        config: Box::new(shared.config.clone()),
    };
    // A client whose socket stays blocked for as long as it takes to fill
    // its queue is as slow as one that lags on the queue itself.
    let budget = Duration::from_micros(shared.config.tick_period_us() * shared.config.network.client_queue as u64)
        .max(MIN_SEND_BUDGET);
    let stop = stopped(shared.stop.clone());
    tokio::pin!(stop);
    let mut last_sent = None;
    let mut ok = socket.send(Message::Text(config.to_json().into())).await.is_ok();
    if let (true, Some(l)) = (ok, &latest) {
        ok = socket.send(Message::Text(l.json.clone())).await.is_ok();
        last_sent = Some(l.frame.tick);
    }
    while ok {
        tokio::select! {
            _ = &mut stop => {
                let _ = socket.send(Message::Close(None)).await;
                break;
            }
            frame = frames.recv() => match frame {
                Ok((tick, _)) if last_sent.is_some_and(|t| tick <= t) => {}
                Ok((tick, json)) => match tokio::time::timeout(budget, socket.send(Message::Text(json))).await {
                    Ok(sent) => {
                        ok = sent.is_ok();
                        last_sent = Some(tick);
                    }
                    Err(_) => {
                        log::warn!("disconnecting a client blocked for {budget:?}");
                        break;
                    }
                },
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::warn!("disconnecting a client {n} frames behind");
                    let _ = socket.send(error_message("slow_consumer", format!("fell {n} frames behind"))).await;
                    let _ = socket.send(Message::Close(None)).await;
                    break;
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            incoming = socket.recv() => match incoming {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => break,
                Some(Ok(_)) => {}
            },
        }
    }
    shared.clients.fetch_sub(1, Ordering::Relaxed);
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(PoseMessage),
    Many(Vec<PoseMessage>),
}

#[derive(Debug, Serialize)]
struct IngestReply {
    accepted: usize,
    rejected: Vec<String>,
}

async fn simulated_pose(State(shared): State<Arc<Shared>>, Json(body): Json<OneOrMany>) -> Response {
    let messages = match body {
        OneOrMany::One(m) => vec![m],
        OneOrMany::Many(v) => v,
    };
    let mut reply = IngestReply { accepted: 0, rejected: Vec::new() };
    {
        let mut pipeline = shared.pipeline.lock().expect("pipeline lock");
        for (i, m) in messages.iter().enumerate() {
            match pipeline.message(m, shared.clock.now_us()) {
                Ok(IngestOutcome::Accepted(_)) => reply.accepted += 1,
                Ok(other) => reply.rejected.push(format!("message {i}: {other:?}")),
                Err(e) => reply.rejected.push(format!("message {i}: {e}")),
            }
        }
    }
    if reply.accepted > 0 {
        shared.pose_arrived.notify_one();
    }
    let status = if reply.rejected.is_empty() { StatusCode::OK } else { StatusCode::BAD_REQUEST };
    (status, Json(reply)).into_response()
}

/// A hypothetical pose; orientation defaults to identity.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseOverride {
    pub entity: EntityId,
    pub position: [f64; 3],
    /// `[x, y, z, w]`.
    #[serde(default = "identity")]
    pub orientation: [f64; 4],
}

fn identity() -> [f64; 4] {
    [0.0, 0.0, 0.0, 1.0]
}

impl PoseOverride {
    pub fn to_pose(&self) -> Pose {
        let [x, y, z, w] = self.orientation;
        Pose {
            entity: self.entity,
            position: Vector3::from(self.position),
            orientation: Quaternion::new(w, x, y, z),
            timestamp_us: 0,
        }
    }
}

/// Screen size for a what-if query, either explicit or as a diagonal.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ScreenSize {
    Meters { width_m: f64, height_m: f64 },
    Diagonal { diagonal_in: f64, aspect: Option<[f64; 2]> },
}

impl ScreenSize {
    pub fn dims(&self) -> (f64, f64) {
        match *self {
            ScreenSize::Meters { width_m, height_m } => (width_m, height_m),
            ScreenSize::Diagonal { diagonal_in, aspect } => {
                let [aw, ah] = aspect.unwrap_or([16.0, 9.0]);
                panel_dims(diagonal_in, aw, ah)
            }
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    #[serde(default)]
    pub poses: Vec<PoseOverride>,
    pub screen: Option<ScreenSize>,
}

async fn what_if_handler(State(shared): State<Arc<Shared>>, Json(req): Json<WhatIfRequest>) -> Response {
    let snapshot = shared.store.snapshot();
    let overrides: Vec<_> = req.poses.iter().map(PoseOverride::to_pose).collect();
    let tick = shared.latest.load().as_ref().map_or(0, |l| l.frame.tick);
    let now = shared.clock.now_us();
    match what_if(&shared.config, &snapshot.poses, &overrides, req.screen.map(|s| s.dims()), now, tick) {
        Ok(frame) => Json(ServerMessage::Frame(Box::new(frame))).into_response(),
        Err(e) => (
            StatusCode::UNPROCESSABLE_ENTITY,
            Json(ServerMessage::Error { code: "what_if".into(), message: e.to_string() }),
        )
            .into_response(),
    }
}

async fn latest_frame(State(shared): State<Arc<Shared>>) -> Response {
    match shared.latest.load_full() {
        Some(l) => {
            ([(axum::http::header::CONTENT_TYPE, "application/json")], l.json.as_str().to_owned()).into_response()
        }
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

#[derive(Debug, Serialize)]
struct Health {
    tick: Option<u64>,
    clients: usize,
    accepted: u64,
    malformed: u64,
    out_of_sequence: u64,
    clock_skew: u64,
    smoothing_dropped: u64,
}

async fn health(State(shared): State<Arc<Shared>>) -> Json<Health> {
    let (stats, dropped) = {
        let p = shared.pipeline.lock().expect("pipeline lock");
        (p.ingestor().stats(), p.smoother().dropped())
    };
    Json(Health {
        tick: shared.latest.load().as_ref().map(|l| l.frame.tick),
        clients: shared.clients.load(Ordering::Relaxed),
        accepted: stats.accepted,
        malformed: stats.malformed,
        out_of_sequence: stats.out_of_sequence,
        clock_skew: stats.clock_skew,
        smoothing_dropped: dropped,
    })
}
