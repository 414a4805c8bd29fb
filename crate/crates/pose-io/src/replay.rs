//! Playing a trace back as a message stream.

use std::time::{Duration, Instant};

use crate::wire::PoseMessage;
use crate::{PoseIoError, PoseTrace};

/// Offset of every message from the first one, scaled by `1 / speed`.
pub fn schedule(trace: &PoseTrace, speed: f64) -> Result<Vec<(Duration, &PoseMessage)>, PoseIoError> {
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(PoseIoError::InvalidSpeed(speed));
    }
    let Some(t0) = trace.messages.first().map(|m| m.timestamp_us) else {
        return Ok(Vec::new());
    };
    Ok(trace
        .messages
        .iter()
        .map(|m| (Duration::from_secs_f64((m.timestamp_us - t0) as f64 * 1e-6 / speed), m))
        .collect())
}

/// Delivers every message at its scheduled wall-clock time relative to the
/// call. Deadlines are absolute, so scheduling error does not accumulate.
/// `sink` returning `false` stops playback early. Returns the number of
/// messages delivered.
pub fn replay_realtime<F>(trace: &PoseTrace, speed: f64, mut sink: F) -> Result<usize, PoseIoError>
where
    F: FnMut(&PoseMessage) -> bool,
{
    let plan = schedule(trace, speed)?;
    let start = Instant::now();
    let mut delivered = 0;
    for (offset, msg) in plan {
        sleep_until(start + offset);
        delivered += 1;
        if !sink(msg) {
            break;
        }
    }
    Ok(delivered)
}

/// Sleeps coarsely, then spins for the final stretch; plain `sleep` alone
/// overshoots by up to a scheduler quantum.
pub fn sleep_until(deadline: Instant) {
    const SPIN: Duration = Duration::from_micros(250);
    loop {
        let now = Instant::now();
        if now >= deadline {
            return;
        }
        let left = deadline - now;
        if left > SPIN {
            std::thread::sleep(left - SPIN);
        } else {
            std::hint::spin_loop();
        }
    }
}

/// Yields the trace's messages in order with no wall clock involved.
pub fn replay_deterministic(trace: &PoseTrace) -> impl Iterator<Item = &PoseMessage> {
    trace.messages.iter()
}
