//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! ```text
//! cargo test -p silhouette-session --test acceptance
//! ```

mod common;

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::{Matrix4, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use silhouette_core::analysis::{fov_report, panel_dims, EventKind};
use silhouette_core::frustum::{
    blit_rectangle, mirrored_view, offaxis_projection, plain_view, project_ndc, required_overscan, texture_projection,
};
use silhouette_core::mirror::{
    equal_angle_residual, reflection_matrix, solve_reflection_1d, MirrorFrame, PlanarPoint, ReflectionPlane,
    ReflectionQuadratic,
};
use silhouette_core::EntityId;
use silhouette_oracle as oracle;
use silhouette_pose_io::wire::PoseMessage;
use silhouette_pose_io::{Handshake, PoseIoError, PoseTrace, WireError};
use silhouette_session::replay::run_trace;
use silhouette_session::server::serve;
use silhouette_session::synthetic::Script;
use silhouette_session::{SessionClock, SessionConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_frame(rng: &mut impl Rng) -> MirrorFrame {
    let rot = nalgebra::UnitQuaternion::from_euler_angles(
        rng.random_range(-3.0..3.0),
        rng.random_range(-1.5..1.5),
        rng.random_range(-3.0..3.0),
    );
    let origin = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    MirrorFrame::from_rotation(origin, rot, rng.random_range(0.3..2.0), rng.random_range(0.2..1.5)).unwrap()
}

fn solver_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let n = 100_000;
    let (mut worst_s, mut worst_angle, mut outside) = (0.0f64, 0.0f64, 0);
    for i in 0..n {
        let p = PlanarPoint::new(rng.random_range(-10.0..10.0), rng.random_range(0.01..10.0));
        let v = PlanarPoint::new(rng.random_range(-10.0..10.0), rng.random_range(0.01..10.0));
        let plane = if i % 2 == 0 { ReflectionPlane::Xz } else { ReflectionPlane::Yz };
        let s = solve_reflection_1d(plane, p, v).map_err(|e| format!("solver error {e}"))?.s;
        let reference = oracle::min_path_reflection((p.coord, p.depth), (v.coord, v.depth), 1e-12);
        worst_s = worst_s.max((s - reference).abs());
        worst_angle = worst_angle.max(equal_angle_residual(p, v, s));
        outside += !(p.coord.min(v.coord) <= s && s <= p.coord.max(v.coord)) as usize;
    }
    let elapsed = start.elapsed();
    ensure(worst_s < 1e-9, || format!("worst deviation {worst_s:e} m"))?;
    ensure(worst_angle < 1e-9, || format!("worst equal-angle residual {worst_angle:e} rad"))?;
    ensure(outside == 0, || format!("{outside} solutions outside the bound"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{n} configs, max |s - brute force| {worst_s:.1e} m, max residual {worst_angle:.1e} rad, bound 100%, {:.1} s",
        elapsed.as_secs_f64()
    ))
}

fn worked_examples() -> Outcome {
    let mut out = Vec::new();
    for ((pc, pd), (vc, vd), expected) in [((0.0, 1.0), (3.0, 2.0), 1.0), ((2.0, 1.0), (0.0, 3.0), 1.5)] {
        let (p, v) = (PlanarPoint::new(pc, pd), PlanarPoint::new(vc, vd));
        let roots = ReflectionQuadratic::new(p, v).roots().ok_or("quadratic has no real roots")?;
        let (lo, hi) = (pc.min(vc), pc.max(vc));
        let between: Vec<f64> = roots.into_iter().filter(|r| (lo..=hi).contains(r)).collect();
        ensure(between.len() == 1, || format!("roots {roots:?}: {} inside [{lo}, {hi}]", between.len()))?;
        let solved = solve_reflection_1d(ReflectionPlane::Xz, p, v).map_err(|e| e.to_string())?.s;
        ensure((between[0] - expected).abs() <= 1e-12 && (solved - expected).abs() <= 1e-12, || {
            format!("({pc},{pd})/({vc},{vd}): root {} solver {solved}, want {expected}", between[0])
        })?;
        out.push(format!("({pc},{pd})/({vc},{vd}) -> {solved} (roots {:.4}, {:.4})", roots[0], roots[1]));
    }
    Ok(out.join("; "))
}

fn rendering_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let frame = random_frame(&mut rng);
        let eye_local = Vector3::new(
            rng.random_range(-1.0..frame.width() + 1.0),
            rng.random_range(-1.0..frame.height() + 1.0),
            rng.random_range(0.2..4.0),
        );
        let eye = frame.to_world(&eye_local);
        let view = mirrored_view(&eye, &frame).map_err(|e| e.to_string())?;
        let plain = plain_view(&eye, &frame);
        let reflect = reflection_matrix(&frame);
        let proj = offaxis_projection(&eye_local, &frame, 0.05, 100.0).map_err(|e| e.to_string())?;
        for _ in 0..1_000 {
            let local =
                Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.05..6.0));
            let q = frame.to_world(&local);
            let image = reflect.transform_point(&q.into()).coords;
            worst = worst.max((project_ndc(&proj, &view, &q) - project_ndc(&proj, &plain, &image)).abs().max());
        }
    }
    let (mut involution, mut det) = (0.0f64, 0.0f64);
    for _ in 0..1_000 {
        let m = reflection_matrix(&random_frame(&mut rng));
        involution = involution.max((m * m - Matrix4::identity()).abs().max());
        det = det.max((m.determinant() + 1.0).abs());
    }
    ensure(worst < 1e-9, || format!("worst NDC deviation {worst:e}"))?;
    ensure(involution < 1e-12 && det < 1e-12, || format!("|R^2 - I| {involution:e}, |det + 1| {det:e}"))?;
    Ok(format!("10^4 points, max NDC deviation {worst:.1e}; |R^2 - I| {involution:.1e}, |det R + 1| {det:.1e}"))
}

fn two_pass_agreement() -> Outcome {
    let (width_px, height_px) = (1920.0, 1080.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let (w, h) = panel_dims(24.0, 16.0, 9.0);
    let frame = MirrorFrame::axis_aligned(w, h).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for _ in 0..1_000 {
        let eye_local =
            Vector3::new(rng.random_range(-1.0..w + 1.0), rng.random_range(-1.0..h + 1.0), rng.random_range(0.2..4.0));
        let eye = frame.to_world(&eye_local);
        let overscan = required_overscan(&eye_local, &frame).max(1.3);
        let view = mirrored_view(&eye, &frame).map_err(|e| e.to_string())?;
        let one_pass = offaxis_projection(&eye_local, &frame, 0.05, 100.0).map_err(|e| e.to_string())?;
        let tex_proj = texture_projection(&eye_local, &frame, overscan, 0.05, 100.0).map_err(|e| e.to_string())?;
        let blit = blit_rectangle(&eye_local, &frame, overscan).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let q = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-1.0..3.0), rng.random_range(0.1..8.0));
            let direct = project_ndc(&one_pass, &view, &q);
            let tex = project_ndc(&tex_proj, &view, &q);
            let uv = 0.5 * (tex.xy() + Vector2::new(1.0, 1.0));
            let du = ((uv.x - blit.min.x) / blit.width() - 0.5 * (direct.x + 1.0)) * width_px;
            let dv = ((uv.y - blit.min.y) / blit.height() - 0.5 * (direct.y + 1.0)) * height_px;
            worst = worst.max(du.abs()).max(dv.abs());
        }
    }
    ensure(worst <= 1.0, || format!("worst {worst} px"))?;
    Ok(format!("10^3 viewers x 20 points, worst {worst:.1e} px at 1920x1080"))
}

fn screen_size_finding() -> Outcome {
    let centered = |diag: f64| {
        let (w, h) = panel_dims(diag, 16.0, 9.0);
        fov_report(&Vector3::new(0.5 * w, 0.5 * h, 0.5), w, h).map(|r| r.horizontal_deg).map_err(|e| e.to_string())
    };
    let (f24, f50) = (centered(24.0)?, centered(50.0)?);
    let reference = |diag: f64| oracle::centered_hfov_deg(oracle::panel_dims(diag, 16.0, 9.0).0, 0.5);
    let (r24, r50) = (reference(24.0), reference(50.0));
    ensure((f24 - 55.97).abs() <= 0.1, || format!("hFOV(24in) {f24:.3}, want 55.97 +- 0.1"))?;
    ensure((f24 - r24).abs() <= 0.1, || format!("hFOV(24in) {f24:.3} vs closed form {r24:.3}"))?;
    // The closed form gives 95.81 at 50in; the quoted 95.7 is a rounding
    // slip, so the tolerance is applied against the closed form.
    ensure((f50 - r50).abs() <= 0.1, || format!("hFOV(50in) {f50:.3} vs closed form {r50:.3}"))?;
    ensure(f50 > f24, || format!("hFOV(50in) {f50:.3} <= hFOV(24in) {f24:.3}"))?;
    let sweep: Vec<f64> = (0..20).map(|k| centered(20.0 + 3.0 * k as f64)).collect::<Result<_, _>>()?;
    ensure(sweep.windows(2).all(|w| w[1] > w[0]), || format!("non-monotone sweep {sweep:?}"))?;
    Ok(format!(
        "hFOV 24in {f24:.3} deg, 50in {f50:.3} deg (closed form {r50:.3}; quoted ~95.7 is off by {:.2}), 20-size sweep 20..77in monotone",
        r50 - 95.7
    ))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn determinism() -> Outcome {
    let golden: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data("reference.digest.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let expected = golden["digest"].as_str().ok_or("golden file has no digest")?;
    let trace = PoseTrace::load(&data("reference.posetrace")).map_err(|e| e.to_string())?;
    let config = SessionConfig { deterministic: true, ..SessionConfig::default() };
    let mut digests = Vec::new();
    let mut frames = 0;
    for _ in 0..3 {
        let run = run_trace(&config, &trace).map_err(|e| e.to_string())?;
        frames = run.frames.len();
        digests.push(run.digest());
    }
    ensure(digests.iter().all(|d| d == expected), || format!("digests {digests:?}, golden {expected}"))?;
    Ok(format!("3 runs x {frames} frames, digest {}... matches golden", &expected[..16]))
}

fn latency() -> Outcome {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let server = serve(common::ephemeral_config()).await.map_err(|e| e.to_string())?;
        let period = Duration::from_micros(server_period());
        let messages = 360;
        let run_for = period * (messages + 30);
        let mut readers = Vec::new();
        for _ in 0..3 {
            let mut ws = common::connect(server.http_addr, "").await;
            readers.push(tokio::spawn(async move {
                let mut seen = Vec::new();
                let until = tokio::time::Instant::now() + run_for;
                while tokio::time::Instant::now() < until {
                    let Some(f) = common::next_frame(&mut ws, Duration::from_millis(500)).await else { break };
                    let at = Instant::now();
                    if let Some(ts) = f["pose_timestamps"]["viewer"].as_u64() {
                        seen.push((at, ts));
                    }
                }
                common::close(ws).await;
                seen
            }));
        }
        // The test clock is epoch-anchored like the server's, so the
        // handshake offset is near zero and stamped times line up.
        let clock = SessionClock::new();
        let mut tracker = common::Tracker::new(server.ingest_addr, 1, clock.now_us()).await;
        tokio::time::sleep(Duration::from_millis(50)).await;
        let mut sent: Vec<(u64, Instant)> = Vec::new();
        let start = tokio::time::Instant::now();
        for k in 0..messages {
            tokio::time::sleep_until(start + period * k).await;
            let ts = clock.now_us();
            sent.push((ts, Instant::now()));
            tracker.send_standard(ts, 0.001 * (k % 50) as f64).await;
        }
        let mut latencies = Vec::new();
        let mut per_client = Vec::new();
        for reader in readers {
            let seen = reader.await.map_err(|e| e.to_string())?;
            let mut first: HashMap<usize, Instant> = HashMap::new();
            for (at, ts) in seen {
                let i = sent.partition_point(|(s, _)| *s < ts.saturating_sub(2_000));
                if sent.get(i).is_some_and(|(s, _)| s.abs_diff(ts) < 2_000) {
                    first.entry(i).or_insert(at);
                }
            }
            per_client.push(first.len());
            latencies.extend(first.into_iter().map(|(i, at)| at.duration_since(sent[i].1).as_secs_f64() * 1e3));
        }
        server.shutdown().await;
        ensure(latencies.len() > messages as usize, || format!("only {} matched deliveries", latencies.len()))?;
        latencies.sort_by(f64::total_cmp);
        let q = |p: f64| latencies[((latencies.len() - 1) as f64 * p).round() as usize];
        let median = q(0.5);
        ensure(median < 5.0, || format!("median {median:.2} ms (p90 {:.2} ms)", q(0.9)))?;
        Ok(format!(
            "{} deliveries to 3 clients ({per_client:?} poses each), median {median:.2} ms, p90 {:.2} ms",
            latencies.len(),
            q(0.9)
        ))
    })
}

fn server_period() -> u64 {
    SessionConfig::default().tick_period_us()
}

fn random_message(rng: &mut impl Rng) -> PoseMessage {
    loop {
        let q: [f32; 4] = std::array::from_fn(|_| rng.random_range(-1.0f32..1.0));
        let n = q.iter().map(|v| v * v).sum::<f32>().sqrt();
        let m = PoseMessage {
            sender: rng.random(),
            seq: rng.random(),
            entity: EntityId::ALL[rng.random_range(0..EntityId::ALL.len())],
            timestamp_us: rng.random(),
            position: std::array::from_fn(|_| f32::from_bits(rng.random())),
            orientation: q.map(|v| v / n),
        };
        if m.validate().is_ok() {
            return m;
        }
    }
}

fn bits(m: &PoseMessage) -> (u32, u64, EntityId, u64, [u32; 3], [u32; 4]) {
    (m.sender, m.seq, m.entity, m.timestamp_us, m.position.map(f32::to_bits), m.orientation.map(f32::to_bits))
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1008);
    let config = SessionConfig::default();
    let mut trace = PoseTrace::new(config.trace_header(1_700_000_000_000_000));
    for _ in 0..10_000 {
        let m = random_message(&mut rng);
        let back = PoseMessage::decode(&m.encode()).map_err(|e| e.to_string())?;
        ensure(bits(&back) == bits(&m), || format!("binary round trip changed {m:?}"))?;
        trace.messages.push(m);
    }
    trace.messages.sort_by_key(|m| m.timestamp_us);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("random.posetrace");
    trace.save(&path).map_err(|e| e.to_string())?;
    let loaded = PoseTrace::load(&path).map_err(|e| e.to_string())?;
    ensure(loaded.header == trace.header, || "header changed".into())?;
    ensure(loaded.messages.len() == trace.messages.len(), || "message count changed".into())?;
    ensure(loaded.messages.iter().zip(&trace.messages).all(|(a, b)| bits(a) == bits(b)), || {
        "trace round trip changed a message".into()
    })?;

    let good = random_message(&mut rng).encode();
    let mut checks: Vec<(&str, bool)> = Vec::new();
    let truncated = PoseMessage::decode(&good[..30]);
    checks.push(("truncated", matches!(truncated, Err(WireError::Truncated { .. }))));
    let mut bad_len = good.clone();
    bad_len[0] = 48;
    checks.push(("bad length", matches!(PoseMessage::decode(&bad_len), Err(WireError::BadLength { .. }))));
    let mut trailing = good.clone();
    trailing.push(0);
    checks.push(("trailing bytes", matches!(PoseMessage::decode(&trailing), Err(WireError::TrailingBytes { .. }))));
    let mut entity = good.clone();
    entity[16] = 42;
    checks.push(("unknown entity", matches!(PoseMessage::decode(&entity), Err(WireError::UnknownEntity(42)))));
    let mut nan = good.clone();
    nan[25..29].copy_from_slice(&f32::NAN.to_le_bytes());
    checks.push(("non-finite", matches!(PoseMessage::decode(&nan), Err(WireError::NonFinite { .. }))));
    let mut unnormalized = PoseMessage::decode(&good).map_err(|e| e.to_string())?;
    unnormalized.orientation = [0.0, 0.0, 0.0, 2.0];
    checks.push((
        "non-unit quaternion",
        matches!(PoseMessage::decode(&unnormalized.encode()), Err(WireError::NotUnitQuaternion { .. })),
    ));
    let handshake =
        Handshake::parse(br#"{"version":1,"sender":1,"position_units":"mm","time_units":"us","sender_clock_us":0}"#);
    checks.push(("handshake units", matches!(handshake, Err(WireError::Handshake(_)))));
    let mut text = trace.to_string();
    text.push_str("{\"sender\": 1, \"oops\": true}\n");
    let corrupt = PoseTrace::read_from(text.as_bytes());
    checks.push(("corrupt trace line", matches!(corrupt, Err(PoseIoError::Trace { line: 10_002, .. }))));
    let headless = PoseTrace::read_from(&b""[..]);
    checks.push(("missing trace header", matches!(headless, Err(PoseIoError::Trace { line: 0, .. }))));
    let failed: Vec<_> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    ensure(failed.is_empty(), || format!("malformed input accepted or misclassified: {failed:?}"))?;
    Ok(format!("10^4 messages bit-exact through wire and trace file; {} malformed cases rejected", checks.len()))
}

fn teleport_flagging() -> Outcome {
    let config = SessionConfig { deterministic: true, ..SessionConfig::default() };
    let jumps: Vec<(f64, Vector3<f64>)> = (0..10)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            (2.5 * (k + 1) as f64, Vector3::new(sign * (3.0 + 0.1 * k as f64), 0.0, 0.2 * sign))
        })
        .collect();
    let script = Script { duration_s: 28.0, teleports: jumps.clone(), ..Script::default() };
    let trace = script.trace(&config);
    let run = run_trace(&config, &trace).map_err(|e| e.to_string())?;
    let flags: Vec<_> = run.frames.iter().flat_map(|f| &f.events).filter(|e| e.kind == EventKind::Teleport).collect();
    ensure(flags.len() == 10, || format!("{} flags for 10 jumps", flags.len()))?;
    let period = config.tick_period_us() as f64 * 1e-6;
    for (flag, (at, jump)) in flags.iter().zip(&jumps) {
        let t = flag.tick as f64 * period;
        ensure((t - at).abs() < 0.05, || format!("flag at {t:.3} s for jump at {at} s"))?;
        ensure(flag.magnitude >= jump.norm() - 0.05, || {
            format!("flag magnitude {} for {} m jump", flag.magnitude, jump.norm())
        })?;
    }
    Ok(format!(
        "{} s walk, 10 jumps of 3.0..3.9 m, {} flags at {} m/s",
        script.duration_s,
        flags.len(),
        config.teleport_threshold_mps
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("reflection solver vs brute force", solver_oracle),
        ("worked reflection examples", worked_examples),
        ("mirror rendering equivalence", rendering_equivalence),
        ("two-pass vs one-pass frustum", two_pass_agreement),
        ("screen size vs field of view", screen_size_finding),
        ("end-to-end determinism", determinism),
        ("pipeline latency", latency),
        ("wire and trace round trip", round_trip),
        ("teleport flagging", teleport_flagging),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS  {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {}. {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
