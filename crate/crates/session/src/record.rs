//! Recording tracker traffic to a `.posetrace` file.

use std::io::Write;
use std::net::SocketAddr;
use std::path::Path;

use silhouette_pose_io::trace::{TraceRecorder, DEFAULT_REORDER_WINDOW_US};
use silhouette_pose_io::{IngestOutcome, Ingestor, PoseMessage};
use tokio::net::UdpSocket;

use crate::{SessionClock, SessionConfig, SessionError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecordSummary {
    pub written: u64,
    pub rejected: u64,
    pub late: u64,
}

/// Accepted messages are written with their timestamp moved onto the
/// recorder's clock; every other field is kept bit-for-bit.
pub fn rebase(msg: &PoseMessage, outcome: &IngestOutcome) -> Option<PoseMessage> {
    match outcome {
        IngestOutcome::Accepted(pose) => Some(PoseMessage { timestamp_us: pose.timestamp_us, ..*msg }),
        _ => None,
    }
}

/// Listens for tracker datagrams until `stop` resolves and writes them to
/// `path`. `on_bound` receives the bound address (useful with port 0).
pub async fn record<F>(
    config: &SessionConfig,
    path: &Path,
    stop: F,
    on_bound: impl FnOnce(SocketAddr),
) -> Result<RecordSummary, SessionError>
where
    F: std::future::Future<Output = ()>,
{
    let addr = SocketAddr::new(config.network.bind, config.network.ingest_port);
    let socket =
        UdpSocket::bind(addr).await.map_err(|source| SessionError::Bind { what: "tracker ingest", addr, source })?;
    on_bound(socket.local_addr()?);
    let clock = SessionClock::new();
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut recorder = TraceRecorder::new(file, &config.trace_header(clock.epoch_us()), DEFAULT_REORDER_WINDOW_US)?;
    let mut ingestor = Ingestor::new();
    let mut summary = RecordSummary::default();
    let mut buf = [0u8; 2048];
    tokio::pin!(stop);
    loop {
        tokio::select! {
            _ = &mut stop => break,
            received = socket.recv_from(&mut buf) => {
                let (n, _) = received?;
                let bytes = &buf[..n];
                let now = clock.now_us();
                if silhouette_pose_io::wire::is_handshake(bytes) {
                    if let Err(e) = ingestor.datagram(bytes, now) {
                        summary.rejected += 1;
                        log::warn!("rejected handshake: {e}");
                    }
                    continue;
                }
                match PoseMessage::decode(bytes).map(|m| rebase(&m, &ingestor.message(&m, now))) {
                    Ok(Some(m)) => {
                        if !recorder.record(m)? {
                            summary.late += 1;
                        }
                    }
                    Ok(None) => summary.rejected += 1,
                    Err(e) => {
                        summary.rejected += 1;
                        log::warn!("rejected datagram: {e}");
                    }
                }
            }
        }
    }
    let (mut out, written) = recorder.finish()?;
    out.flush()?;
    summary.written = written;
    Ok(summary)
}
