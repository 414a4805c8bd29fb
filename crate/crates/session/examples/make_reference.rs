//! Regenerates `data/reference.posetrace` and its golden digest.
//!
//! ```text
//! cargo run -p silhouette-session --example make_reference
//! ```
//!
//! Only rerun this after an intentional change to the geometry or the frame
//! format; the determinism test compares against the committed digest.

use std::path::PathBuf;

use silhouette_session::replay::run_trace;
use silhouette_session::synthetic::reference_script;
use silhouette_session::SessionConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    std::fs::create_dir_all(&data)?;
    let config = SessionConfig { deterministic: true, ..SessionConfig::default() };
    let trace = reference_script().trace(&config);
    let trace_path = data.join("reference.posetrace");
    trace.save(&trace_path)?;

    let run = run_trace(&config, &silhouette_pose_io::PoseTrace::load(&trace_path)?)?;
    let golden = serde_json::json!({ "frames": run.frames.len(), "digest": run.digest() });
    let golden_path = data.join("reference.digest.json");
    std::fs::write(&golden_path, format!("{}\n", serde_json::to_string_pretty(&golden)?))?;
    println!("{} messages, {} frames, digest {}", trace.messages.len(), run.frames.len(), run.digest());
    Ok(())
}
