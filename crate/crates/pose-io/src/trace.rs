//! `.posetrace` files: one JSON header line, then one JSON [`PoseMessage`] per
//! line, ordered by timestamp.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use silhouette_core::silhouette::BodyModel;
use silhouette_core::MountOffset;

use crate::wire::PoseMessage;
use crate::{PoseIoError, PoseTimeline};

pub const TRACE_FORMAT: &str = "posetrace";
pub const TRACE_VERSION: u32 = 1;
pub const WORLD_CONVENTION: &str = "right_handed_y_up";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub world: String,
    pub position_units: String,
    pub time_units: String,
    pub mirror_width_m: f64,
    pub mirror_height_m: f64,
    pub mount: MountOffset,
    pub body: BodyModel,
    /// Wall-clock time of the first message, microseconds since the Unix epoch.
    pub start_epoch_us: u64,
}

impl TraceHeader {
    pub fn new(
        mirror_width_m: f64,
        mirror_height_m: f64,
        mount: MountOffset,
        body: BodyModel,
        start_epoch_us: u64,
    ) -> Self {
        Self {
            format: TRACE_FORMAT.into(),
            version: TRACE_VERSION,
            world: WORLD_CONVENTION.into(),
            position_units: "m".into(),
            time_units: "us".into(),
            mirror_width_m,
            mirror_height_m,
            mount,
            body,
            start_epoch_us,
        }
    }

    /// Differences that make this trace unusable under `expected`, one
    /// human-readable line each. The start epoch is not compared.
    pub fn diff(&self, expected: &TraceHeader) -> Vec<String> {
        let mut out = Vec::new();
        let mut text = |name: &str, a: &str, b: &str| {
            if a != b {
                out.push(format!("{name}: trace `{a}`, config `{b}`"));
            }
        };
        text("format", &self.format, &expected.format);
        text("version", &self.version.to_string(), &expected.version.to_string());
        text("world", &self.world, &expected.world);
        text("position_units", &self.position_units, &expected.position_units);
        text("time_units", &self.time_units, &expected.time_units);
        let numbers = [
            ("mirror_width_m", self.mirror_width_m, expected.mirror_width_m),
            ("mirror_height_m", self.mirror_height_m, expected.mirror_height_m),
            ("body.shoulder_half_width", self.body.shoulder_half_width, expected.body.shoulder_half_width),
            ("body.head_radius", self.body.head_radius, expected.body.head_radius),
            ("body.arm_radius", self.body.arm_radius, expected.body.arm_radius),
        ];
        for (name, a, b) in numbers {
            if (a - b).abs() > 1e-9 {
                out.push(format!("{name}: trace {a}, config {b}"));
            }
        }
        let (ta, tb) = (self.mount.translation, expected.mount.translation);
        if (ta - tb).amax() > 1e-9 {
            out.push(format!(
                "mount.translation: trace [{}, {}, {}], config [{}, {}, {}]",
                ta.x, ta.y, ta.z, tb.x, tb.y, tb.z
            ));
        }
        let angle = self.mount.rotation.angle_to(&expected.mount.rotation);
        if angle > 1e-9 {
            out.push(format!("mount.rotation: differs by {angle:.3e} rad"));
        }
        out
    }

    pub fn check_against(&self, expected: &TraceHeader) -> Result<(), PoseIoError> {
        let diff = self.diff(expected);
        if diff.is_empty() {
            Ok(())
        } else {
            Err(PoseIoError::HeaderMismatch(diff))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseTrace {
    pub header: TraceHeader,
    pub messages: Vec<PoseMessage>,
}

impl PoseTrace {
    pub fn new(header: TraceHeader) -> Self {
        Self { header, messages: Vec::new() }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), PoseIoError> {
        write_line(&mut w, &self.header)?;
        for m in &self.messages {
            write_line(&mut w, m)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), PoseIoError> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PoseIoError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }

    /// Parses a trace, rejecting a missing header, malformed or invalid
    /// messages, and timestamps that go backwards. Blank lines are skipped.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self, PoseIoError> {
        let mut header: Option<TraceHeader> = None;
        let mut messages: Vec<PoseMessage> = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| PoseIoError::Trace { line: lineno, reason };
            if header.is_none() {
                let h: TraceHeader = serde_json::from_str(&line).map_err(|e| bad(format!("header: {e}")))?;
                if h.format != TRACE_FORMAT {
                    return Err(bad(format!("format `{}` is not `{TRACE_FORMAT}`", h.format)));
                }
                if h.version != TRACE_VERSION {
                    return Err(bad(format!("trace version {} unsupported", h.version)));
                }
                header = Some(h);
                continue;
            }
            let m: PoseMessage = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            m.validate().map_err(|e| bad(e.to_string()))?;
            if let Some(prev) = messages.last() {
                if m.timestamp_us < prev.timestamp_us {
                    return Err(bad(format!("timestamp {} precedes previous {}", m.timestamp_us, prev.timestamp_us)));
                }
            }
            messages.push(m);
        }
        let header = header.ok_or(PoseIoError::Trace { line: 0, reason: "missing header".into() })?;
        Ok(Self { header, messages })
    }

    pub fn duration_us(&self) -> u64 {
        match (self.messages.first(), self.messages.last()) {
            (Some(a), Some(b)) => b.timestamp_us - a.timestamp_us,
            _ => 0,
        }
    }

    pub fn timeline(&self) -> PoseTimeline {
        let mut tl = PoseTimeline::new();
        for m in &self.messages {
            tl.push(m.to_pose());
        }
        tl
    }
}

fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<(), PoseIoError> {
    serde_json::to_writer(&mut *w, value).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// The trace in file form.
impl std::fmt::Display for PoseTrace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|_| std::fmt::Error)?;
        f.write_str(std::str::from_utf8(&buf).map_err(|_| std::fmt::Error)?)
    }
}

/// Streams messages to a trace file, restoring timestamp order within a
/// bounded reorder window so that datagrams arriving slightly out of order
/// still produce a sorted trace.
pub struct TraceRecorder<W: Write> {
    out: W,
    window_us: u64,
    pending: BinaryHeap<Reverse<(u64, u64, Ordered)>>,
    arrival: u64,
    written_until: Option<u64>,
    late: u64,
    written: u64,
}

/// Heap payload ordered only by arrival (via the tuple), never compared itself.
struct Ordered(PoseMessage);

impl PartialEq for Ordered {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}
impl Eq for Ordered {}
impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ordered {
    fn cmp(&self, _: &Self) -> std::cmp::Ordering {
        std::cmp::Ordering::Equal
    }
}

pub const DEFAULT_REORDER_WINDOW_US: u64 = 250_000;

impl<W: Write> TraceRecorder<W> {
    pub fn new(mut out: W, header: &TraceHeader, window_us: u64) -> Result<Self, PoseIoError> {
        write_line(&mut out, header)?;
        Ok(Self { out, window_us, pending: BinaryHeap::new(), arrival: 0, written_until: None, late: 0, written: 0 })
    }

    /// Queues a message. Returns `false` if it arrived too late to be placed
    /// in order; such messages are discarded.
    pub fn record(&mut self, msg: PoseMessage) -> Result<bool, PoseIoError> {
        if self.written_until.is_some_and(|t| msg.timestamp_us < t) {
            self.late += 1;
            return Ok(false);
        }
        self.pending.push(Reverse((msg.timestamp_us, self.arrival, Ordered(msg))));
        self.arrival += 1;
        let newest = self.pending.iter().map(|Reverse((t, ..))| *t).max().unwrap_or(0);
        let cutoff = newest.saturating_sub(self.window_us);
        while let Some(Reverse((t, ..))) = self.pending.peek() {
            if *t >= cutoff {
                break;
            }
            self.emit_next()?;
        }
        Ok(true)
    }

    fn emit_next(&mut self) -> Result<(), PoseIoError> {
        if let Some(Reverse((t, _, Ordered(msg)))) = self.pending.pop() {
            write_line(&mut self.out, &msg)?;
            self.written_until = Some(t);
            self.written += 1;
        }
        Ok(())
    }

    /// Messages discarded for arriving behind already-written ones.
    pub fn late(&self) -> u64 {
        self.late
    }

    /// Writes everything still buffered and returns the sink and the number
    /// of messages written.
    pub fn finish(mut self) -> Result<(W, u64), PoseIoError> {
        while !self.pending.is_empty() {
            self.emit_next()?;
        }
        self.out.flush()?;
        Ok((self.out, self.written))
    }
}
