//! Reference computations that check the production geometry by an
//! independent route.
//!
//! Nothing here depends on `silhouette-core`; inputs and outputs are plain
//! arrays. The routines favor obviously-correct formulations over speed:
//! path lengths are minimized by golden-section search in double-double
//! arithmetic, rotations are built with Rodrigues' formula, reflections are
//! found with the mirror-image construction.

use twofloat::TwoFloat;

/// Inverse golden ratio, `(sqrt(5) - 1) / 2`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimizes the optical path `|V - S| + |S - P|` over the mirror line
/// `z = 0`, where `player = (coord, depth)` and `viewer = (coord, depth)`.
///
/// Fermat's principle: the stationary path is the reflected ray. The search
/// runs in double-double so the flat bottom of the path-length curve is still
/// resolved when both depths are small. Terminates when the bracket is below
/// `tol`.
pub fn min_path_reflection(player: (f64, f64), viewer: (f64, f64), tol: f64) -> f64 {
    let (px, pz) = (TwoFloat::from(player.0), TwoFloat::from(player.1));
    let (vx, vz) = (TwoFloat::from(viewer.0), TwoFloat::from(viewer.1));
    let path = |s: TwoFloat| -> TwoFloat {
        let dp = s - px;
        let dv = s - vx;
        (dp * dp + pz * pz).sqrt() + (dv * dv + vz * vz).sqrt()
    };

    // The minimizer always lies between the two feet of the perpendiculars.
    let mut lo = TwoFloat::from(player.0.min(viewer.0));
    let mut hi = TwoFloat::from(player.0.max(viewer.0));
    if hi - lo == TwoFloat::from(0.0) {
        return player.0;
    }
    let r = TwoFloat::from(INV_PHI);
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let mut fa = path(a);
    let mut fb = path(b);
    let tol = TwoFloat::from(tol);
    for _ in 0..400 {
        if hi - lo < tol {
            break;
        }
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = path(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = path(b);
        }
    }
    f64::from((lo + hi) / TwoFloat::from(2.0))
}

/// Mirror-image construction: reflect the player through `z = 0` and
/// intersect the segment from the viewer to that image with the glass.
/// Returns the `(x, y)` hit point.
pub fn image_method_reflection(player: [f64; 3], viewer: [f64; 3]) -> [f64; 2] {
    let image = [player[0], player[1], -player[2]];
    let t = viewer[2] / (viewer[2] - image[2]);
    [viewer[0] + t * (image[0] - viewer[0]), viewer[1] + t * (image[1] - viewer[1])]
}

/// Minimizes the optical path over the whole glass plane by cyclic
/// coordinate golden-section search. Slow; use on small samples.
pub fn min_path_reflection_3d(player: [f64; 3], viewer: [f64; 3], tol: f64) -> [f64; 2] {
    let path = |x: f64, y: f64| -> TwoFloat {
        let dist = |q: [f64; 3]| {
            let dx = TwoFloat::from(x) - TwoFloat::from(q[0]);
            let dy = TwoFloat::from(y) - TwoFloat::from(q[1]);
            let dz = TwoFloat::from(q[2]);
            (dx * dx + dy * dy + dz * dz).sqrt()
        };
        dist(player) + dist(viewer)
    };
    let mut s = [0.5 * (player[0] + viewer[0]), 0.5 * (player[1] + viewer[1])];
    for _ in 0..200 {
        let prev = s;
        for axis in 0..2 {
            let (lo, hi) = (player[axis].min(viewer[axis]), player[axis].max(viewer[axis]));
            s[axis] = golden_section(lo, hi, tol * 1e-2, |t| if axis == 0 { path(t, s[1]) } else { path(s[0], t) });
        }
        if (s[0] - prev[0]).abs() < tol && (s[1] - prev[1]).abs() < tol {
            break;
        }
    }
    s
}

fn golden_section(lo: f64, hi: f64, tol: f64, f: impl Fn(f64) -> TwoFloat) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    if hi - lo <= 0.0 {
        return lo;
    }
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = f(b);
        }
        if a >= b {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Angle between a ray from `from` to the glass point `s` and the glass
/// normal, for the 2D reduction `(coord, depth)`.
pub fn incidence_angle(from: (f64, f64), s: f64) -> f64 {
    (from.0 - s).abs().atan2(from.1)
}

/// Rotation matrix (row-major) for `angle` radians about the unit `axis`,
/// by Rodrigues' formula.
pub fn rodrigues(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
        [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
        [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
    ]
}

pub fn mat3_mul(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat3_apply(m: [[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Where on a `width x height` glass, in normalized `[0, 1]^2` coordinates,
/// an eye at `eye` (mirror-local) sees the reflection of the room point `q`
/// (mirror-local). Computed by intersecting the eye-to-image segment with the
/// glass, which is what a correctly mirrored, screen-pinned camera must
/// reproduce.
pub fn seen_on_glass(eye: [f64; 3], q: [f64; 3], width: f64, height: f64) -> [f64; 2] {
    let [x, y] = image_method_reflection(q, eye);
    [x / width, y / height]
}

/// Screen dimensions `(width, height)` in meters of a panel with the given
/// diagonal in inches and aspect ratio `aspect_w : aspect_h`.
pub fn panel_dims(diagonal_in: f64, aspect_w: f64, aspect_h: f64) -> (f64, f64) {
    let diag_m = diagonal_in * 0.0254;
    let hyp = (aspect_w * aspect_w + aspect_h * aspect_h).sqrt();
    (diag_m * aspect_w / hyp, diag_m * aspect_h / hyp)
}

/// Horizontal field of view, in degrees, of a centered viewer at `depth`
/// from a screen `width` wide: `2 atan(width / 2 / depth)`.
pub fn centered_hfov_deg(width: f64, depth: f64) -> f64 {
    2.0 * (0.5 * width / depth).atan().to_degrees()
}

/// Remaining error after `samples` steps of a first-order exponential filter
/// with time constant `tau` tracking a unit step at sample interval `dt`:
/// `exp(-samples * dt / tau)`.
pub fn exponential_step_residual(samples: u32, dt: f64, tau: f64) -> f64 {
    (-(samples as f64) * dt / tau).exp()
}
