//! Raw tracker input to published snapshot: teleport detection on the raw
//! poses, then smoothing, then the [`PoseStore`].

use std::sync::mpsc;
use std::sync::Arc;

use silhouette_core::analysis::{EventFlag, TeleportDetector};
use silhouette_core::Pose;
use silhouette_pose_io::{IngestOutcome, Ingestor, PoseIoError, PoseMessage, PoseStore, Smoother, WireError};

use crate::SessionConfig;

/// Single writer of the pose store. Teleport flags go out on a channel so the
/// tick loop can drain them without sharing a lock with ingest.
pub struct IngestPipeline {
    ingestor: Ingestor,
    smoother: Smoother,
    teleport: TeleportDetector,
    store: Arc<PoseStore>,
    events: mpsc::Sender<EventFlag>,
}

impl IngestPipeline {
    pub fn new(
        config: &SessionConfig,
        store: Arc<PoseStore>,
    ) -> Result<(Self, mpsc::Receiver<EventFlag>), PoseIoError> {
        let (tx, rx) = mpsc::channel();
        Ok((
            Self {
                ingestor: Ingestor::new(),
                smoother: Smoother::new(config.smoothing_tau_s)?,
                teleport: TeleportDetector::for_player(config.teleport_threshold_mps),
                store,
                events: tx,
            },
            rx,
        ))
    }

    pub fn store(&self) -> &Arc<PoseStore> {
        &self.store
    }

    pub fn ingestor(&self) -> &Ingestor {
        &self.ingestor
    }

    pub fn smoother(&self) -> &Smoother {
        &self.smoother
    }

    /// A pose already on the session clock. Returns whether it was published.
    pub fn pose(&mut self, raw: &Pose) -> bool {
        if let Some(flag) = self.teleport.observe(raw) {
            log::info!("teleport of {} by {:.2} m", raw.entity, flag.magnitude);
            // The receiver only disappears when the session is shutting down.
            let _ = self.events.send(flag);
        }
        match self.smoother.smooth(raw) {
            Some(smoothed) => {
                self.store.update(smoothed);
                true
            }
            None => false,
        }
    }

    /// One UDP datagram received at `now_us` on the session clock.
    pub fn datagram(&mut self, bytes: &[u8], now_us: u64) -> Result<IngestOutcome, WireError> {
        let outcome = self.ingestor.datagram(bytes, now_us)?;
        self.publish(&outcome);
        Ok(outcome)
    }

    /// A message from a non-binary path such as the HTTP bridge.
    pub fn message(&mut self, msg: &PoseMessage, now_us: u64) -> Result<IngestOutcome, WireError> {
        msg.validate()?;
        let outcome = self.ingestor.message(msg, now_us);
        self.publish(&outcome);
        Ok(outcome)
    }

    fn publish(&mut self, outcome: &IngestOutcome) {
        match outcome {
            IngestOutcome::Accepted(pose) => {
                self.pose(pose);
            }
            IngestOutcome::OutOfSequence { sender, seq, last } => {
                log::debug!("sender {sender}: seq {seq} not after {last}, dropped");
            }
            IngestOutcome::ClockSkew { sender, skew_us } => {
                log::warn!("sender {sender}: timestamp {skew_us} us off the session clock, dropped");
            }
            IngestOutcome::Handshake { sender, offset_us } => {
                log::info!("sender {sender} handshake, clock offset {offset_us} us");
            }
        }
    }
}

/// Drains pending teleport flags.
pub fn drain(events: &mpsc::Receiver<EventFlag>) -> Vec<EventFlag> {
    events.try_iter().collect()
}
