//! Mirror coordinate frame, the planar reflection-point solver and the
//! reflection matrix.
//!
//! Mirror-local coordinates put the origin at the bottom-left corner of the
//! glass, `x` along its width, `y` along its height and `z` along the outward
//! normal into the room. The glass is the plane `z = 0`, so everything that
//! can be seen in the mirror has `z > 0`.
//!
//! The reflection point of a player as seen by a viewer is solved separately
//! in the `xz` and `yz` planes. In each plane the law of reflection,
//!
//! ```text
//! v_z / |V - S| = p_z / |P - S|
//! ```
//!
//! squares into the quadratic
//!
//! ```text
//! s^2 (p_z^2 - v_z^2) + 2 s (p_x v_z^2 - v_x p_z^2) + v_x^2 p_z^2 - p_x^2 v_z^2 = 0
//! ```
//!
//! whose physical root is the one between `p_x` and `v_x`.

use nalgebra::{Matrix3, Matrix4, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::pose::{EntityId, Pose};
use crate::{GeometryError, Result};

/// Orthonormality tolerance for a mirror basis.
pub const BASIS_TOLERANCE: f64 = 1e-9;

/// Rigid transform from the tracker mounted on the mirror to the mirror frame
/// (bottom-left corner of the glass), expressed in the tracker's own axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MountOffset {
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

impl MountOffset {
    pub fn identity() -> Self {
        Self { translation: Vector3::zeros(), rotation: UnitQuaternion::identity() }
    }

    /// Tracker centered on the top edge of the glass with its axes aligned
    /// to the mirror frame (facing the room).
    pub fn top_center(width: f64, height: f64) -> Self {
        Self { translation: Vector3::new(-0.5 * width, -height, 0.0), rotation: UnitQuaternion::identity() }
    }
}

/// The glass's coordinate system plus its physical size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorFrame {
    origin: Vector3<f64>,
    /// Columns are the local x, y, z axes in world coordinates.
    basis: Matrix3<f64>,
    width: f64,
    height: f64,
}

impl MirrorFrame {
    /// Builds a frame from an explicit basis, checking orthonormality and
    /// right-handedness.
    pub fn new(origin: Vector3<f64>, basis: Matrix3<f64>, width: f64, height: f64) -> Result<Self> {
        if !origin.iter().chain(basis.iter()).all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite("mirror frame"));
        }
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(GeometryError::InvalidFrame(format!("dimensions must be positive, got {width} x {height}")));
        }
        let gram = basis.transpose() * basis;
        let off = (gram - Matrix3::identity()).abs().max();
        if off > BASIS_TOLERANCE {
            return Err(GeometryError::InvalidFrame(format!("basis is not orthonormal (max Gram deviation {off:e})")));
        }
        if basis.determinant() < 0.0 {
            return Err(GeometryError::InvalidFrame("basis is left-handed".into()));
        }
        Ok(Self { origin, basis, width, height })
    }

    pub fn from_rotation(origin: Vector3<f64>, rotation: UnitQuaternion<f64>, width: f64, height: f64) -> Result<Self> {
        Self::new(origin, *rotation.to_rotation_matrix().matrix(), width, height)
    }

    /// Glass at the world origin with the world axes as its basis.
    pub fn axis_aligned(width: f64, height: f64) -> Result<Self> {
        Self::new(Vector3::zeros(), Matrix3::identity(), width, height)
    }

    pub fn origin(&self) -> Vector3<f64> {
        self.origin
    }

    pub fn basis(&self) -> Matrix3<f64> {
        self.basis
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    /// Outward unit normal, pointing into the room.
    pub fn normal(&self) -> Vector3<f64> {
        self.basis.column(2).into_owned()
    }

    /// Same placement, different glass size.
    pub fn with_dims(&self, width: f64, height: f64) -> Result<Self> {
        Self::new(self.origin, self.basis, width, height)
    }

    pub fn to_local(&self, p_world: &Vector3<f64>) -> Vector3<f64> {
        self.basis.transpose() * (p_world - self.origin)
    }

    pub fn to_world(&self, p_local: &Vector3<f64>) -> Vector3<f64> {
        self.origin + self.basis * p_local
    }

    /// Glass corners in world coordinates: bottom-left, bottom-right,
    /// top-right, top-left.
    pub fn corners(&self) -> [Vector3<f64>; 4] {
        [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(self.width, 0.0, 0.0),
            Vector3::new(self.width, self.height, 0.0),
            Vector3::new(0.0, self.height, 0.0),
        ]
        .map(|c| self.to_world(&c))
    }
}

/// Derives the glass frame from the pose of the tracker mounted on it.
pub fn mirror_frame_from_pose(tracker: &Pose, offset: &MountOffset, width: f64, height: f64) -> Result<MirrorFrame> {
    if tracker.entity != EntityId::Mirror {
        return Err(GeometryError::Calibration(format!("expected a mirror tracker pose, got {}", tracker.entity)));
    }
    let rotation = tracker.rotation().map_err(|e| GeometryError::Calibration(e.to_string()))?;
    let frame_rotation = rotation * offset.rotation;
    let origin = tracker.position + rotation * offset.translation;
    MirrorFrame::from_rotation(origin, frame_rotation, width, height)
}

pub fn to_mirror_frame(p_world: &Vector3<f64>, frame: &MirrorFrame) -> Vector3<f64> {
    frame.to_local(p_world)
}

pub fn from_mirror_frame(p_local: &Vector3<f64>, frame: &MirrorFrame) -> Vector3<f64> {
    frame.to_world(p_local)
}

/// Which 2D reduction a reflection point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionPlane {
    Xz,
    Yz,
}

/// A point in one of the 2D reductions: lateral coordinate along the glass
/// and depth in front of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarPoint {
    pub coord: f64,
    pub depth: f64,
}

impl PlanarPoint {
    pub fn new(coord: f64, depth: f64) -> Self {
        Self { coord, depth }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionPoint2D {
    pub s: f64,
    pub plane: ReflectionPlane,
}

/// The squared law-of-reflection condition for one plane,
/// `a s^2 + 2 b s + c = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionQuadratic {
    player: PlanarPoint,
    viewer: PlanarPoint,
}

impl ReflectionQuadratic {
    pub fn new(player: PlanarPoint, viewer: PlanarPoint) -> Self {
        Self { player, viewer }
    }

    /// `(a, b, c)` with `a = p_z^2 - v_z^2`, `b = p_x v_z^2 - v_x p_z^2` and
    /// `c = v_x^2 p_z^2 - p_x^2 v_z^2`.
    pub fn coefficients(&self) -> (f64, f64, f64) {
        let (px, pz) = (self.player.coord, self.player.depth);
        let (vx, vz) = (self.viewer.coord, self.viewer.depth);
        (pz * pz - vz * vz, px * vz * vz - vx * pz * pz, vx * vx * pz * pz - px * px * vz * vz)
    }

    pub fn eval(&self, s: f64) -> f64 {
        let (a, b, c) = self.coefficients();
        a * s * s + 2.0 * b * s + c
    }

    /// Both roots when the quadratic is proper (`p_z != v_z`).
    ///
    /// The reduced-formula discriminant `(b/a)^2 - c/a` simplifies to
    /// `(p_z v_z (p_x - v_x) / a)^2`, so the roots factor exactly as
    /// `(p_x v_z + v_x p_z) / (p_z + v_z)` and
    /// `(p_x v_z - v_x p_z) / (v_z - p_z)`. Evaluating the product forms keeps
    /// full precision when the depths are nearly equal, where the textbook
    /// formula loses most of its digits to cancellation.
    pub fn roots(&self) -> Option<[f64; 2]> {
        let (px, pz) = (self.player.coord, self.player.depth);
        let (vx, vz) = (self.viewer.coord, self.viewer.depth);
        if pz == vz {
            return None;
        }
        let between = (px * vz + vx * pz) / (pz + vz);
        let beyond = (px * vz - vx * pz) / (vz - pz);
        Some([between, beyond])
    }
}

/// Absolute difference between the angles that the incoming ray (player to
/// glass) and the outgoing ray (glass to viewer) make with the normal.
pub fn equal_angle_residual(player: PlanarPoint, viewer: PlanarPoint, s: f64) -> f64 {
    let incident = (player.coord - s).abs().atan2(player.depth);
    let reflected = (viewer.coord - s).abs().atan2(viewer.depth);
    (incident - reflected).abs()
}

/// Solves for the point on the glass where the viewer sees the player's
/// reflection, in one 2D reduction.
///
/// Both points must be strictly in front of the glass. The result always
/// lies between the two lateral coordinates.
pub fn solve_reflection_1d(
    plane: ReflectionPlane,
    player: PlanarPoint,
    viewer: PlanarPoint,
) -> Result<ReflectionPoint2D> {
    let finite = [player.coord, player.depth, viewer.coord, viewer.depth].iter().all(|v| v.is_finite());
    if !finite {
        return Err(GeometryError::NonFinite("reflection input"));
    }
    if player == viewer && player.depth == 0.0 {
        return Err(GeometryError::Degenerate);
    }
    if player.depth <= 0.0 {
        return Err(GeometryError::BehindMirror { subject: "player", depth: player.depth });
    }
    if viewer.depth <= 0.0 {
        return Err(GeometryError::BehindMirror { subject: "viewer", depth: viewer.depth });
    }

    let (lo, hi) =
        if player.coord <= viewer.coord { (player.coord, viewer.coord) } else { (viewer.coord, player.coord) };

    let s = if player.coord == viewer.coord {
        player.coord
    } else if player.depth == viewer.depth {
        // The quadratic term vanishes and the linear equation reduces to the
        // midpoint.
        0.5 * (player.coord + viewer.coord)
    } else {
        let roots = ReflectionQuadratic::new(player, viewer).roots().ok_or(GeometryError::NoPhysicalRoot)?;
        select_root(roots, lo, hi, player, viewer)?
    };
    Ok(ReflectionPoint2D { s: s.clamp(lo, hi), plane })
}

fn select_root(roots: [f64; 2], lo: f64, hi: f64, player: PlanarPoint, viewer: PlanarPoint) -> Result<f64> {
    // A few ulps of slack: the between-root is a convex combination of lo and
    // hi and can only leave the bound through rounding.
    let slack = 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0);
    let inside = |s: f64| s.is_finite() && s >= lo - slack && s <= hi + slack;
    match (inside(roots[0]), inside(roots[1])) {
        (true, false) => Ok(roots[0]),
        (false, true) => Ok(roots[1]),
        (true, true) => {
            let r0 = equal_angle_residual(player, viewer, roots[0]);
            let r1 = equal_angle_residual(player, viewer, roots[1]);
            Ok(if r1 < r0 { roots[1] } else { roots[0] })
        }
        (false, false) => Err(GeometryError::NoPhysicalRoot),
    }
}

/// Reflection point of `player` seen from `viewer`, both mirror-local, as
/// `(s_x, s_y)` on the glass.
pub fn reflect_point_on_mirror(player: &Vector3<f64>, viewer: &Vector3<f64>) -> Result<Vector2<f64>> {
    let sx = solve_reflection_1d(
        ReflectionPlane::Xz,
        PlanarPoint::new(player.x, player.z),
        PlanarPoint::new(viewer.x, viewer.z),
    )?;
    let sy = solve_reflection_1d(
        ReflectionPlane::Yz,
        PlanarPoint::new(player.y, player.z),
        PlanarPoint::new(viewer.y, viewer.z),
    )?;
    Ok(Vector2::new(sx.s, sy.s))
}

/// Homogeneous world-frame reflection about the glass plane.
pub fn reflection_matrix(frame: &MirrorFrame) -> Matrix4<f64> {
    let n = frame.normal();
    let d = n.dot(&frame.origin());
    let linear = Matrix3::identity() - 2.0 * n * n.transpose();
    let mut m = linear.to_homogeneous();
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&(2.0 * d * n));
    m
}
