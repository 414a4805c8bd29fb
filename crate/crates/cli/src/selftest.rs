//! Geometry checked against the independent reference implementations.

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use silhouette_core::analysis::{fov_report, panel_dims};
use silhouette_core::frustum::{mirrored_view, offaxis_projection, project_ndc};
use silhouette_core::mirror::{
    reflect_point_on_mirror, solve_reflection_1d, MirrorFrame, PlanarPoint, ReflectionPlane,
};
use silhouette_core::{EntityId, Pose};
use silhouette_oracle as oracle;
use silhouette_pose_io::timeline::interpolate;
use silhouette_pose_io::Smoother;

use crate::CliError;

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    cases: usize,
    worst: f64,
    tolerance: f64,
    pass: bool,
}

fn check(name: &'static str, tolerance: f64, errors: impl Iterator<Item = f64>) -> Check {
    let (mut cases, mut worst) = (0, 0.0f64);
    for e in errors {
        cases += 1;
        // NaN must fail, so compare with `!(e <= worst)`.
        worst = if e <= worst { worst } else { e };
    }
    Check { name, cases, worst, tolerance, pass: worst <= tolerance }
}

fn frame(rng: &mut impl Rng) -> MirrorFrame {
    let rot = UnitQuaternion::from_euler_angles(
        rng.random_range(-3.0..3.0),
        rng.random_range(-1.5..1.5),
        rng.random_range(-3.0..3.0),
    );
    let origin = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    MirrorFrame::from_rotation(origin, rot, rng.random_range(0.3..2.0), rng.random_range(0.2..1.5))
        .expect("valid frame")
}

fn checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = Vec::new();

    out.push(check(
        "planar reflection point vs path-length minimum",
        1e-9,
        (0..20_000).map(|_| {
            let p = PlanarPoint::new(rng.random_range(-10.0..10.0), rng.random_range(0.01..10.0));
            let v = PlanarPoint::new(rng.random_range(-10.0..10.0), rng.random_range(0.01..10.0));
            let s = solve_reflection_1d(ReflectionPlane::Xz, p, v).map_or(f64::NAN, |r| r.s);
            (s - oracle::min_path_reflection((p.coord, p.depth), (v.coord, v.depth), 1e-12)).abs()
        }),
    ));

    out.push(check(
        "3D reflection point vs mirror image",
        1e-9,
        (0..20_000).map(|_| {
            let p: [f64; 3] =
                [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(0.01..10.0)];
            let v: [f64; 3] =
                [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(0.01..10.0)];
            let [x, y] = oracle::image_method_reflection(p, v);
            reflect_point_on_mirror(&p.into(), &v.into()).map_or(f64::NAN, |s| (s.x - x).abs().max((s.y - y).abs()))
        }),
    ));

    out.push(check(
        "mirrored camera screen position vs mirror image",
        1e-9,
        (0..5_000).map(|_| {
            let f = frame(&mut rng);
            let eye = Vector3::new(
                rng.random_range(-1.0..f.width() + 1.0),
                rng.random_range(-1.0..f.height() + 1.0),
                rng.random_range(0.2..4.0),
            );
            let q = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.05..6.0));
            let (Ok(view), Ok(proj)) =
                (mirrored_view(&f.to_world(&eye), &f), offaxis_projection(&eye, &f, 0.05, 100.0))
            else {
                return f64::NAN;
            };
            let ndc = project_ndc(&proj, &view, &f.to_world(&q));
            let [u, v] = oracle::seen_on_glass(eye.into(), q.into(), f.width(), f.height());
            (0.5 * (ndc.x + 1.0) - u).abs().max((0.5 * (ndc.y + 1.0) - v).abs())
        }),
    ));

    out.push(check(
        "panel size and centered hFOV vs closed form",
        1e-9,
        (0..200).map(|k| {
            let diag = 10.0 + 0.5 * k as f64;
            let depth = 0.2 + 0.01 * k as f64;
            let (w, h) = panel_dims(diag, 16.0, 9.0);
            let (ow, oh) = oracle::panel_dims(diag, 16.0, 9.0);
            let hfov = fov_report(&Vector3::new(0.5 * w, 0.5 * h, depth), w, h).map_or(f64::NAN, |r| r.horizontal_deg);
            (hfov - oracle::centered_hfov_deg(ow, depth)).abs().max((w - ow).abs()).max((h - oh).abs())
        }),
    ));

    out.push(check("pose filter step response vs exponential", 1e-12, {
        let (tau, dt_us) = (0.03, 11_111u64);
        let mut smoother = Smoother::new(tau).expect("valid tau");
        let at = |x: f64, t: u64| Pose::at(EntityId::PlayerHead, Vector3::new(x, 1.7, 1.0), t);
        smoother.smooth(&at(0.0, 0));
        (1..=90u32)
            .map(|i| {
                let out = smoother.smooth(&at(1.0, i as u64 * dt_us)).map_or(f64::NAN, |p| p.position.x);
                (out - (1.0 - oracle::exponential_step_residual(i, dt_us as f64 * 1e-6, tau))).abs()
            })
            .collect::<Vec<_>>()
            .into_iter()
    }));

    out.push(check(
        "orientation interpolation vs axis-angle rotation",
        1e-9,
        (0..5_000).map(|_| {
            let axis =
                Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if axis.norm() < 1e-3 {
                return 0.0;
            }
            let angle = rng.random_range(0.0..3.0);
            let frac: f64 = rng.random_range(0.0..1.0);
            let unit = nalgebra::Unit::new_normalize(axis);
            let a = Pose::new(EntityId::Viewer, Vector3::zeros(), UnitQuaternion::identity(), 0);
            let b = Pose::new(EntityId::Viewer, Vector3::zeros(), UnitQuaternion::from_axis_angle(&unit, angle), 1_000);
            let mid = interpolate(&a, &b, (frac * 1_000.0).round() as u64);
            let t = (frac * 1_000.0).round() / 1_000.0;
            let reference = oracle::rodrigues(axis.into(), angle * t);
            let Ok(rotation) = mid.rotation() else { return f64::NAN };
            let m = rotation.to_rotation_matrix();
            (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| (m[(i, j)] - reference[i][j]).abs())
                .fold(0.0, f64::max)
        }),
    ));
    out
}

pub fn run(json: bool) -> Result<(), CliError> {
    let results = checks();
    let failed = results.iter().filter(|c| !c.pass).count();
    if json {
        println!("{}", serde_json::json!({ "pass": failed == 0, "checks": results }));
    } else {
        println!("{:<50} {:>7} {:>10} {:>9}  result", "check", "cases", "worst", "tolerance");
        for c in &results {
            println!(
                "{:<50} {:>7} {:>10.2e} {:>9.0e}  {}",
                c.name,
                c.cases,
                c.worst,
                c.tolerance,
                if c.pass { "PASS" } else { "FAIL" }
            );
        }
    }
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} selftest check(s) failed")));
    }
    Ok(())
}
