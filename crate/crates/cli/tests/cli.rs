use std::io::{BufRead, BufReader};
use std::net::UdpSocket;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_silhouette"))
}

fn repo(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(path)
}

fn reference() -> PathBuf {
    repo("crates/session/data/reference.posetrace")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn silhouette")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Every stdout line must be a JSON document.
fn json_lines(o: &Output) -> Vec<Value> {
    stdout(o).lines().map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("not JSON ({e}): {l}"))).collect()
}

#[test]
fn shipped_example_config_validates() {
    let example = repo("config/example.json");
    let o = run(&["--config", example.to_str().unwrap(), "validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&["validate", "--json", "--config", example.to_str().unwrap()]);
    let v = &json_lines(&o)[0];
    assert_eq!(v["valid"], true);
    assert_eq!(v["config"]["tick_rate_hz"], 90.0);
}

#[test]
fn usage_errors_exit_1() {
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["validate", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(&["validate", "--shape", "triangle"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_errors_exit_2_and_name_the_culprit() {
    let o = run(&["validate", "--tick-rate", "500"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--tick-rate"), "{}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"overscan": 20}"#).unwrap();
    let o = run(&["--config", bad.to_str().unwrap(), "validate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("overscan"));

    std::fs::write(&bad, r#"{"tick_rate": 60}"#).unwrap();
    let o = run(&["--config", bad.to_str().unwrap(), "validate", "--json"]);
    assert_eq!(o.status.code(), Some(2));
    let v = &json_lines(&o)[0];
    assert!(v["error"].as_str().unwrap().contains("tick_rate"));
    assert_eq!(v["exit_code"], 2);
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.json");
    std::fs::write(&file, r#"{"tick_rate_hz": 60, "smoothing_tau_s": 0.1}"#).unwrap();
    let o = run(&[
        "--config",
        file.to_str().unwrap(),
        "validate",
        "--json",
        "--tick-rate",
        "120",
        "--shape",
        "narrow_oval",
    ]);
    let v = &json_lines(&o)[0]["config"];
    assert_eq!(v["tick_rate_hz"], 120.0);
    assert_eq!(v["smoothing_tau_s"], 0.1);
    assert_eq!(v["shape"]["variant"], "narrow_oval");
    assert_eq!(v["teleport_threshold_mps"], 10.0);
}

#[test]
fn deterministic_replay_prints_identical_digests() {
    let trace = reference();
    let args = ["replay", "--deterministic", trace.to_str().unwrap()];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    let golden: Value =
        serde_json::from_str(&std::fs::read_to_string(repo("crates/session/data/reference.digest.json")).unwrap())
            .unwrap();
    let last = stdout(&a).lines().last().unwrap().to_owned();
    assert!(last.contains(golden["digest"].as_str().unwrap()), "{last}");

    let j = run(&["replay", "--deterministic", "--json", trace.to_str().unwrap()]);
    let v = &json_lines(&j)[0];
    assert_eq!(v["digest"], golden["digest"]);
    assert_eq!(v["frame_digests"].as_array().unwrap().len(), golden["frames"].as_u64().unwrap() as usize);
}

#[test]
fn replay_refuses_a_mismatched_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.json");
    std::fs::write(&file, r#"{"mirror": {"width_m": 1.1, "height_m": 0.62}}"#).unwrap();
    let o = run(&["--config", file.to_str().unwrap(), "replay", "--deterministic", reference().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mirror_width_m"), "{}", stderr(&o));
}

#[test]
fn missing_trace_is_a_runtime_failure() {
    let o = run(&["replay", "--deterministic", "/definitely/not/here.posetrace"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn analyze_reports_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("frames.csv");
    let o = run(&["analyze", reference().to_str().unwrap(), "--json", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = &json_lines(&o)[0];
    assert_eq!(v["events"]["teleport"], 2);
    assert_eq!(v["teleports"].as_array().unwrap().len(), 2);
    let frames = v["frames"].as_u64().unwrap() as usize;
    assert_eq!(v["reports"].as_array().unwrap().len(), frames);
    let hfov = &v["hfov_deg"];
    assert!(hfov["min"].as_f64().unwrap() <= hfov["mean"].as_f64().unwrap());

    let mut reader = csv::Reader::from_path(&csv).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert!(headers.iter().any(|h| h == "hfov_deg"));
    assert_eq!(reader.records().count(), frames);
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS") && !stdout(&o).contains("FAIL"));
    let v = &json_lines(&run(&["selftest", "--json"]))[0];
    assert_eq!(v["pass"], true);
    assert!(v["checks"].as_array().unwrap().len() >= 5);
}

#[test]
fn serve_runs_for_the_requested_time() {
    let o = run(&["serve", "--for", "0.5", "--port-ingest", "0", "--port-serve", "0", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = &json_lines(&o)[0];
    assert!(v["ws"].as_str().unwrap().starts_with("ws://127.0.0.1:"));
}

#[test]
fn serve_reports_a_busy_port() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let o = run(&["serve", "--for", "0.5", "--port-ingest", "0", "--port-serve", &port]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains(&port), "{}", stderr(&o));
}

#[test]
fn record_writes_received_poses() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("live.posetrace");
    let mut child = bin()
        .args(["record", out.to_str().unwrap(), "--duration", "1.5", "--port-ingest", "0", "--json"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let first: Value = serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap();
    let addr = first["ingest"].as_str().unwrap().trim_start_matches("udp://").to_owned();

    let socket = UdpSocket::bind("127.0.0.1:0").unwrap();
    let handshake = silhouette_pose_io::Handshake::new(5, 1_000).to_line();
    socket.send_to(handshake.as_bytes(), &addr).unwrap();
    for seq in 1..=20u64 {
        let msg = silhouette_pose_io::PoseMessage {
            sender: 5,
            seq,
            entity: silhouette_core::EntityId::Viewer,
            timestamp_us: 1_000 + seq * 11_111,
            position: [0.1, 1.6, 1.0],
            orientation: [0.0, 0.0, 0.0, 1.0],
        };
        socket.send_to(&msg.encode(), &addr).unwrap();
    }
    socket.send_to(b"garbage", &addr).unwrap();

    let summary: Value = serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap();
    assert!(child.wait().unwrap().success());
    assert_eq!(summary["written"], 20);
    assert_eq!(summary["rejected"], 1);
    let trace = silhouette_pose_io::PoseTrace::load(&out).unwrap();
    assert_eq!(trace.messages.len(), 20);
    assert!(trace.messages.windows(2).all(|w| w[1].timestamp_us - w[0].timestamp_us == 11_111));
}
