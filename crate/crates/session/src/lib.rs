//! The spectator session: consumes tracker poses, computes the mirrored
//! frustum and silhouette every tick, and streams the result to renderers.
//!
//! [`engine`] holds the pure per-tick computation, [`pipeline`] the ingest
//! path, [`replay`] the deterministic trace driver and [`server`] the
//! networked service (UDP ingest, WebSocket frames, HTTP bridge).

pub mod config;
pub mod engine;
pub mod frame;
pub mod pipeline;
pub mod record;
pub mod replay;
pub mod server;
pub mod synthetic;

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use thiserror::Error;

pub use config::{ConfigError, SessionConfig};
pub use engine::{Session, TickError};
pub use frame::{FrameGeometry, FrameUpdate, ServerMessage, PROTOCOL_VERSION};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    PoseIo(#[from] silhouette_pose_io::PoseIoError),
    #[error("cannot bind {what} on {addr}: {source}")]
    Bind {
        what: &'static str,
        addr: std::net::SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Monotonic microsecond clock anchored to the Unix epoch at creation, so
/// processes on one host agree to within clock-read jitter.
#[derive(Debug, Clone, Copy)]
pub struct SessionClock {
    start: Instant,
    epoch_us: u64,
}

impl Default for SessionClock {
    fn default() -> Self {
        Self::new()
    }
}

impl SessionClock {
    pub fn new() -> Self {
        let epoch_us = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_micros() as u64);
        Self { start: Instant::now(), epoch_us }
    }

    pub fn now_us(&self) -> u64 {
        self.epoch_us + self.start.elapsed().as_micros() as u64
    }

    pub fn epoch_us(&self) -> u64 {
        self.epoch_us
    }
}
