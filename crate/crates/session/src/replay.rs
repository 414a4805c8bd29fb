//! Deterministic trace replay: fixed tick times on the trace clock, no wall
//! clock, no threads.

use std::sync::Arc;

use silhouette_pose_io::{PoseStore, PoseTrace};

use crate::engine::Session;
use crate::frame::{run_digest, FrameUpdate};
use crate::pipeline::{drain, IngestPipeline};
use crate::{SessionConfig, SessionError};

/// Frames produced by one deterministic run.
#[derive(Debug, Clone)]
pub struct ReplayRun {
    pub frames: Vec<FrameUpdate>,
}

impl ReplayRun {
    pub fn digest(&self) -> String {
        run_digest(self.frames.iter().map(|f| f.digest.as_str()))
    }
}

/// Replays `trace` through the full ingest and tick pipeline.
///
/// Ticks fall at `t0 + k·T` from the first message to the last; before each
/// tick every message stamped at or before it is ingested in file order.
/// Message timestamps are used as-is (they are on the recording session's
/// clock), so no clock mapping happens.
pub fn run_trace(config: &SessionConfig, trace: &PoseTrace) -> Result<ReplayRun, SessionError> {
    trace.header.check_against(&config.trace_header(trace.header.start_epoch_us))?;
    let store = Arc::new(PoseStore::new());
    let (mut pipeline, events) = IngestPipeline::new(config, store.clone())?;
    let mut session = Session::new(config.clone());
    let mut frames = Vec::new();
    let (Some(first), Some(last)) = (trace.messages.first(), trace.messages.last()) else {
        return Ok(ReplayRun { frames });
    };
    let period = config.tick_period_us();
    let mut next = 0;
    let mut t = first.timestamp_us;
    while t <= last.timestamp_us {
        while let Some(m) = trace.messages.get(next).filter(|m| m.timestamp_us <= t) {
            pipeline.pose(&m.to_pose());
            next += 1;
        }
        let snapshot = store.snapshot();
        frames.push(session.tick(&snapshot.poses, t, drain(&events)));
        t += period;
    }
    Ok(ReplayRun { frames })
}
