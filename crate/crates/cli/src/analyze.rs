//! Per-frame field-of-view and coverage report plus event counts, from a
//! deterministic run of a trace.

use std::path::Path;

use serde::Serialize;
use serde_json::json;
use silhouette_core::analysis::{EventFlag, EventKind};
use silhouette_pose_io::PoseTrace;
use silhouette_session::replay::run_trace;
use silhouette_session::{FrameUpdate, SessionConfig};

use crate::CliError;

#[derive(Debug, Serialize)]
struct Row {
    tick: u64,
    timestamp_us: u64,
    held: bool,
    hfov_deg: Option<f64>,
    vfov_deg: Option<f64>,
    solid_angle_sr: Option<f64>,
    diagonal_in: Option<f64>,
    viewer_depth_m: Option<f64>,
    coverage: Option<f64>,
    overflow_fraction: Option<f64>,
    teleports: usize,
    stale: usize,
    offscreen: usize,
}

impl Row {
    fn new(f: &FrameUpdate) -> Self {
        let count = |kind| f.events.iter().filter(|e| e.kind == kind).count();
        let g = f.geometry.as_ref();
        Row {
            tick: f.tick,
            timestamp_us: f.timestamp_us,
            held: f.held,
            hfov_deg: g.map(|g| g.fov.horizontal_deg),
            vfov_deg: g.map(|g| g.fov.vertical_deg),
            solid_angle_sr: g.map(|g| g.fov.solid_angle_sr),
            diagonal_in: g.map(|g| g.fov.diagonal_in),
            viewer_depth_m: g.map(|g| g.fov.viewer_depth_m),
            coverage: g.map(|g| g.coverage.coverage),
            overflow_fraction: g.map(|g| g.coverage.overflow_fraction),
            teleports: count(EventKind::Teleport),
            stale: count(EventKind::Stale),
            offscreen: count(EventKind::SilhouetteOffscreen),
        }
    }
}

#[derive(Debug, Serialize)]
struct Stat {
    min: f64,
    mean: f64,
    max: f64,
}

fn stat(values: impl Iterator<Item = f64>) -> Option<Stat> {
    let (mut n, mut sum, mut min, mut max) = (0usize, 0.0, f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        n += 1;
        sum += v;
        min = min.min(v);
        max = max.max(v);
    }
    (n > 0).then(|| Stat { min, mean: sum / n as f64, max })
}

pub fn run(config: &SessionConfig, trace_path: &Path, csv_out: Option<&Path>, json: bool) -> Result<(), CliError> {
    let trace = PoseTrace::load(trace_path).map_err(|e| CliError::Runtime(format!("{}: {e}", trace_path.display())))?;
    let run = run_trace(config, &trace)?;
    let rows: Vec<Row> = run.frames.iter().map(Row::new).collect();
    let events: Vec<&EventFlag> = run.frames.iter().flat_map(|f| &f.events).collect();
    let count = |kind| events.iter().filter(|e| e.kind == kind).count();
    let teleports: Vec<_> = events.iter().filter(|e| e.kind == EventKind::Teleport).collect();
    let live = || rows.iter().filter(|r| !r.held);
    let summary = json!({
        "trace": trace_path.display().to_string(),
        "frames": rows.len(),
        "frames_with_geometry": rows.iter().filter(|r| r.hfov_deg.is_some()).count(),
        "held_frames": rows.iter().filter(|r| r.held).count(),
        "hfov_deg": stat(live().filter_map(|r| r.hfov_deg)),
        "vfov_deg": stat(live().filter_map(|r| r.vfov_deg)),
        "viewer_depth_m": stat(live().filter_map(|r| r.viewer_depth_m)),
        "coverage": stat(live().filter_map(|r| r.coverage)),
        "events": {
            "teleport": count(EventKind::Teleport),
            "stale": count(EventKind::Stale),
            "silhouette_offscreen": count(EventKind::SilhouetteOffscreen),
        },
        "teleports": teleports,
    });

    if let Some(path) = csv_out {
        let to_stdout = path == Path::new("-");
        let sink: Box<dyn std::io::Write> =
            if to_stdout { Box::new(std::io::stdout().lock()) } else { Box::new(std::fs::File::create(path)?) };
        let mut w = csv::Writer::from_writer(sink);
        for r in &rows {
            w.serialize(r).map_err(|e| CliError::Runtime(format!("csv: {e}")))?;
        }
        w.flush()?;
        if to_stdout {
            return Ok(());
        }
    }

    if json {
        let mut out = summary;
        out["reports"] = serde_json::to_value(&rows).map_err(|e| CliError::Runtime(e.to_string()))?;
        println!("{out}");
    } else {
        println!(
            "{}: {} frames, {} with geometry, {} held",
            trace_path.display(),
            rows.len(),
            summary["frames_with_geometry"],
            summary["held_frames"]
        );
        for (label, key) in [
            ("hFOV deg", "hfov_deg"),
            ("vFOV deg", "vfov_deg"),
            ("viewer depth m", "viewer_depth_m"),
            ("coverage", "coverage"),
        ] {
            if let Some(s) = summary[key].as_object() {
                println!(
                    "  {label:<15} min {:.3}  mean {:.3}  max {:.3}",
                    s["min"].as_f64().unwrap_or(f64::NAN),
                    s["mean"].as_f64().unwrap_or(f64::NAN),
                    s["max"].as_f64().unwrap_or(f64::NAN)
                );
            }
        }
        println!(
            "  events: {} teleport, {} stale, {} offscreen",
            count(EventKind::Teleport),
            count(EventKind::Stale),
            count(EventKind::SilhouetteOffscreen)
        );
        for t in teleports {
            println!("    teleport at tick {}: {:.2} m", t.tick, t.magnitude);
        }
    }
    Ok(())
}
