//! Helpers shared by the networked tests: a WebSocket client, bare HTTP/1.1
//! requests, and a UDP tracker.
#![allow(dead_code)]

use std::net::SocketAddr;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use nalgebra::Vector3;
use serde_json::Value;
use silhouette_core::{EntityId, Pose};
use silhouette_pose_io::{Handshake, PoseMessage};
use silhouette_session::SessionConfig;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpStream, UdpSocket};
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

pub type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub fn ephemeral_config() -> SessionConfig {
    let mut config = SessionConfig::default();
    config.network.ingest_port = 0;
    config.network.serve_port = 0;
    config
}

pub async fn connect(http: SocketAddr, query: &str) -> Ws {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{http}/ws{query}")).await.expect("ws connect");
    ws
}

/// Next text message as JSON, or `None` on close or timeout.
pub async fn next_json(ws: &mut Ws, timeout: Duration) -> Option<Value> {
    let deadline = tokio::time::Instant::now() + timeout;
    loop {
        let msg = tokio::time::timeout_at(deadline, ws.next()).await.ok()??;
        match msg.ok()? {
            Message::Text(t) => return Some(serde_json::from_str(t.as_str()).expect("server sent JSON")),
            Message::Close(_) => return None,
            _ => {}
        }
    }
}

/// Next `frame` message, skipping anything else.
pub async fn next_frame(ws: &mut Ws, timeout: Duration) -> Option<Value> {
    loop {
        let v = next_json(ws, timeout).await?;
        if v["type"] == "frame" {
            return Some(v);
        }
    }
}

pub async fn close(mut ws: Ws) {
    let _ = ws.send(Message::Close(None)).await;
}

/// Minimal HTTP/1.1 request; returns status and body.
pub async fn http(addr: SocketAddr, method: &str, path: &str, body: Option<&str>) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).await.expect("http connect");
    let body = body.unwrap_or("");
    let request = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(request.as_bytes()).await.unwrap();
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).await.unwrap();
    let text = String::from_utf8(raw).expect("utf-8 response");
    let (head, rest) = text.split_once("\r\n\r\n").expect("response head");
    let status = head.split_whitespace().nth(1).and_then(|s| s.parse().ok()).expect("status");
    let chunked = head.to_ascii_lowercase().contains("transfer-encoding: chunked");
    (status, if chunked { dechunk(rest) } else { rest.to_owned() })
}

fn dechunk(mut s: &str) -> String {
    let mut out = String::new();
    while let Some((size, rest)) = s.split_once("\r\n") {
        let n = usize::from_str_radix(size.trim(), 16).unwrap_or(0);
        if n == 0 {
            break;
        }
        out.push_str(&rest[..n]);
        s = &rest[n + 2..];
    }
    out
}

/// A tracker speaking the binary protocol over UDP.
pub struct Tracker {
    socket: UdpSocket,
    target: SocketAddr,
    sender: u32,
    seq: u64,
}

impl Tracker {
    /// Binds and sends a handshake carrying `clock_us`.
    pub async fn new(target: SocketAddr, sender: u32, clock_us: u64) -> Self {
        let socket = UdpSocket::bind("127.0.0.1:0").await.unwrap();
        socket.send_to(Handshake::new(sender, clock_us).to_line().as_bytes(), target).await.unwrap();
        Self { socket, target, sender, seq: 0 }
    }

    pub async fn send(&mut self, pose: &Pose) {
        self.seq += 1;
        let msg = PoseMessage::from_pose(pose, self.sender, self.seq);
        self.socket.send_to(&msg.encode(), self.target).await.unwrap();
    }

    /// Viewer and player head at fixed, valid positions.
    pub async fn send_standard(&mut self, t_us: u64, dx: f64) {
        self.send(&Pose::at(EntityId::Viewer, Vector3::new(0.1 + dx, 1.6, 1.0), t_us)).await;
        self.send(&Pose::at(EntityId::PlayerHead, Vector3::new(-0.2, 1.75, 2.0), t_us)).await;
    }
}
