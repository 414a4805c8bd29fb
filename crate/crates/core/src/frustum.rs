//! View-dependent rendering parameters for the screen behind the mirror.
//!
//! Camera space follows the OpenGL convention: right-handed, looking down
//! `-z`, clip space mapped to the `[-1, 1]^3` NDC cube. The viewer's camera
//! is aligned with the mirror frame, so it looks into the glass.
//!
//! Two equivalent pipelines are supported:
//!
//! - two-pass: render the mirrored scene with a symmetric, overscanned
//!   frustum into a texture ([`texture_projection`]), then blit the
//!   sub-rectangle given by [`blit_rectangle`] onto the whole screen;
//! - one-pass: render the mirrored scene directly with an off-axis frustum
//!   pinned to the glass corners ([`offaxis_projection`]).

use nalgebra::{Matrix4, UnitQuaternion, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::mirror::{reflection_matrix, MirrorFrame};
use crate::polygon::{Point2, Rect};
use crate::pose::Pose;
use crate::{GeometryError, Result};

pub const DEFAULT_NEAR: f64 = 0.05;
pub const DEFAULT_FAR: f64 = 100.0;
pub const DEFAULT_OVERSCAN: f64 = 1.3;

/// Slack on the texture bounds when checking a blit rectangle.
const BLIT_TOLERANCE: f64 = 1e-12;

/// Offset from the head tracker to the eyes, in the tracker's own axes
/// (forward is `-z`, down is `-y`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EyeOffset {
    pub forward: f64,
    pub down: f64,
}

impl Default for EyeOffset {
    fn default() -> Self {
        Self { forward: 0.10, down: 0.05 }
    }
}

impl EyeOffset {
    pub fn zero() -> Self {
        Self { forward: 0.0, down: 0.0 }
    }

    pub fn eye_position(&self, tracker: &Pose) -> Result<Vector3<f64>> {
        let rotation: UnitQuaternion<f64> = tracker.rotation()?;
        Ok(tracker.position + rotation * Vector3::new(0.0, -self.down, -self.forward))
    }
}

/// Everything a renderer needs for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderParams {
    /// World to mirrored camera.
    pub view_matrix: Matrix4<f64>,
    /// One-pass off-axis projection onto the glass.
    pub projection_matrix: Matrix4<f64>,
    /// Symmetric projection for the overscanned intermediate texture.
    pub texture_projection: Matrix4<f64>,
    /// Glass plane in camera space; visible geometry is on the positive side.
    pub oblique_clip_plane: Vector4<f64>,
    pub texture_blit: Rect,
    pub overscan: f64,
    pub near: f64,
    pub far: f64,
}

fn check_clip_range(near: f64, far: f64) -> Result<()> {
    if near > 0.0 && far > near && far.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::ClipRange { near, far })
    }
}

fn viewer_in_front(viewer_local: &Vector3<f64>, min_depth: f64) -> Result<()> {
    if !viewer_local.iter().all(|v| v.is_finite()) {
        return Err(GeometryError::NonFinite("viewer position"));
    }
    if viewer_local.z <= min_depth {
        return Err(GeometryError::BehindMirror { subject: "viewer", depth: viewer_local.z });
    }
    Ok(())
}

/// World-to-camera transform of an unmirrored camera at `eye` with the
/// mirror's axes.
pub fn plain_view(eye_world: &Vector3<f64>, frame: &MirrorFrame) -> Matrix4<f64> {
    let rt = frame.basis().transpose();
    let mut view = rt.to_homogeneous();
    view.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-(rt * eye_world)));
    view
}

/// Camera at the viewer's eye, composed with the mirror's reflection.
///
/// Viewing a room point through this matrix is the same as viewing its
/// mirror image with the plain camera.
pub fn mirrored_view(eye_world: &Vector3<f64>, frame: &MirrorFrame) -> Result<Matrix4<f64>> {
    viewer_in_front(&frame.to_local(eye_world), 0.0)?;
    Ok(plain_view(eye_world, frame) * reflection_matrix(frame))
}

/// OpenGL-style perspective frustum from near-plane extents.
pub fn frustum_matrix(left: f64, right: f64, bottom: f64, top: f64, near: f64, far: f64) -> Matrix4<f64> {
    let (w, h, d) = (right - left, top - bottom, far - near);
    Matrix4::new(
        2.0 * near / w,
        0.0,
        (right + left) / w,
        0.0,
        0.0,
        2.0 * near / h,
        (top + bottom) / h,
        0.0,
        0.0,
        0.0,
        -(far + near) / d,
        -2.0 * far * near / d,
        0.0,
        0.0,
        -1.0,
        0.0,
    )
}

/// Off-axis projection whose near plane is the glass rectangle scaled
/// towards the eye. The glass corners land exactly on the NDC corners.
pub fn offaxis_projection(
    viewer_local: &Vector3<f64>,
    frame: &MirrorFrame,
    near: f64,
    far: f64,
) -> Result<Matrix4<f64>> {
    check_clip_range(near, far)?;
    viewer_in_front(viewer_local, near * 1e-3)?;
    let k = near / viewer_local.z;
    Ok(frustum_matrix(
        -viewer_local.x * k,
        (frame.width() - viewer_local.x) * k,
        -viewer_local.y * k,
        (frame.height() - viewer_local.y) * k,
        near,
        far,
    ))
}

/// Symmetric projection about the eye's normal axis covering `overscan`
/// times the glass size at the glass depth.
pub fn texture_projection(
    viewer_local: &Vector3<f64>,
    frame: &MirrorFrame,
    overscan: f64,
    near: f64,
    far: f64,
) -> Result<Matrix4<f64>> {
    check_clip_range(near, far)?;
    viewer_in_front(viewer_local, near * 1e-3)?;
    let k = near / viewer_local.z;
    let half_w = 0.5 * overscan * frame.width() * k;
    let half_h = 0.5 * overscan * frame.height() * k;
    Ok(frustum_matrix(-half_w, half_w, -half_h, half_h, near, far))
}

/// Smallest overscan whose texture still contains the glass for this eye.
pub fn required_overscan(viewer_local: &Vector3<f64>, frame: &MirrorFrame) -> f64 {
    let (w, h) = (frame.width(), frame.height());
    let x = 2.0 * viewer_local.x.max(w - viewer_local.x) / w;
    let y = 2.0 * viewer_local.y.max(h - viewer_local.y) / h;
    x.max(y).max(1.0)
}

/// Texture-space rectangle (`[0, 1]^2`, origin bottom-left) of the
/// overscanned texture that covers the glass for this eye.
pub fn blit_rectangle(viewer_local: &Vector3<f64>, frame: &MirrorFrame, overscan: f64) -> Result<Rect> {
    if !(overscan >= 1.0 && overscan.is_finite()) {
        return Err(GeometryError::InsufficientOverscan { required: 1.0, available: overscan });
    }
    viewer_in_front(viewer_local, 0.0)?;
    let (w, h) = (frame.width(), frame.height());
    let u0 = (0.5 * overscan * w - viewer_local.x) / (overscan * w);
    let v0 = (0.5 * overscan * h - viewer_local.y) / (overscan * h);
    let rect = Rect::new(Point2::new(u0, v0), Point2::new(u0 + 1.0 / overscan, v0 + 1.0 / overscan));
    let fits = rect.min.x >= -BLIT_TOLERANCE
        && rect.min.y >= -BLIT_TOLERANCE
        && rect.max.x <= 1.0 + BLIT_TOLERANCE
        && rect.max.y <= 1.0 + BLIT_TOLERANCE;
    if !fits {
        return Err(GeometryError::InsufficientOverscan {
            required: required_overscan(viewer_local, frame),
            available: overscan,
        });
    }
    Ok(rect)
}

/// The glass plane expressed in the camera space of `view`, oriented so that
/// geometry on the room side of the glass evaluates positive and anything
/// between the mirrored camera and the glass evaluates negative. Normalized
/// to a unit normal.
///
/// `view` must be rigid, optionally composed with one reflection.
pub fn oblique_near_clip(view: &Matrix4<f64>, frame: &MirrorFrame) -> Vector4<f64> {
    let n = frame.normal();
    let plane_world = Vector4::new(n.x, n.y, n.z, -n.dot(&frame.origin()));
    // For M = [A t; 0 1] with orthogonal A, M^-T = [A 0; -t^T A 1].
    let a = view.fixed_view::<3, 3>(0, 0).into_owned();
    let t = view.fixed_view::<3, 1>(0, 3).into_owned();
    let normal_cam = a * n;
    let w = -t.dot(&normal_cam) + plane_world.w;
    let len = normal_cam.norm();
    Vector4::new(normal_cam.x, normal_cam.y, normal_cam.z, w) / len
}

/// All render parameters for an eye at `eye_world`. The overscan is widened
/// to [`required_overscan`] when the requested one cannot contain the glass.
pub fn render_params(
    eye_world: &Vector3<f64>,
    frame: &MirrorFrame,
    near: f64,
    far: f64,
    overscan: f64,
) -> Result<RenderParams> {
    let local = frame.to_local(eye_world);
    let view_matrix = mirrored_view(eye_world, frame)?;
    let projection_matrix = offaxis_projection(&local, frame, near, far)?;
    let overscan = overscan.max(required_overscan(&local, frame));
    let texture_projection = texture_projection(&local, frame, overscan, near, far)?;
    let texture_blit = blit_rectangle(&local, frame, overscan)?;
    Ok(RenderParams {
        view_matrix,
        projection_matrix,
        texture_projection,
        oblique_clip_plane: oblique_near_clip(&view_matrix, frame),
        texture_blit,
        overscan,
        near,
        far,
    })
}

/// Projects a world point to NDC through `projection * view`.
pub fn project_ndc(projection: &Matrix4<f64>, view: &Matrix4<f64>, p_world: &Vector3<f64>) -> Vector3<f64> {
    let clip = projection * view * p_world.push(1.0);
    clip.xyz() / clip.w
}

/// Horizontal field of view, in degrees, of an off-axis frustum.
pub fn horizontal_fov_deg(viewer_local: &Vector3<f64>, frame: &MirrorFrame) -> f64 {
    let z = viewer_local.z;
    ((frame.width() - viewer_local.x).atan2(z) + viewer_local.x.atan2(z)).to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Matrix3;

    fn frame(w: f64, h: f64) -> MirrorFrame {
        MirrorFrame::axis_aligned(w, h).unwrap()
    }

    #[test]
    fn axial_glass_point_has_unit_depth() {
        let f = frame(0.6, 0.4);
        let eye = Vector3::new(0.3, 0.2, 1.0);
        let view = mirrored_view(&eye, &f).unwrap();
        let p = view * Vector4::new(0.1, 0.3, 0.0, 1.0);
        assert_relative_eq!(p.z, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn double_reflection_restores_plain_camera() {
        let rot = UnitQuaternion::from_euler_angles(0.2, 0.4, -0.1);
        let f = MirrorFrame::from_rotation(Vector3::new(0.5, 1.0, -2.0), rot, 1.0, 0.6).unwrap();
        let eye = f.to_world(&Vector3::new(0.4, 0.2, 1.3));
        let twice = mirrored_view(&eye, &f).unwrap() * reflection_matrix(&f);
        assert_relative_eq!(twice, plain_view(&eye, &f), epsilon = 1e-12);
    }

    #[test]
    fn mirrored_view_is_improper() {
        let f = frame(1.0, 1.0);
        let view = mirrored_view(&Vector3::new(0.2, 0.8, 2.0), &f).unwrap();
        let block: Matrix3<f64> = view.fixed_view::<3, 3>(0, 0).into_owned();
        assert_relative_eq!(block.determinant(), -1.0, epsilon = 1e-9);
        assert!(mirrored_view(&Vector3::new(0.2, 0.8, -0.1), &f).is_err());
    }

    #[test]
    fn ninety_degree_fov_at_half_width() {
        let f = frame(2.0, 1.0);
        let eye = Vector3::new(1.0, 0.5, 1.0);
        assert_relative_eq!(horizontal_fov_deg(&eye, &f), 90.0, epsilon = 1e-12);
        let p = offaxis_projection(&eye, &f, 0.05, 100.0).unwrap();
        // tan(half-angle) = 1 means the x scale equals 1.
        assert_relative_eq!(p[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn corners_pin_to_ndc_corners() {
        let f = frame(0.531, 0.299);
        let eye = Vector3::new(0.7, -0.1, 0.45);
        let view = mirrored_view(&eye, &f).unwrap();
        let proj = offaxis_projection(&eye, &f, 0.05, 100.0).unwrap();
        let expected = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
        for (c, (ex, ey)) in f.corners().iter().zip(expected) {
            let ndc = project_ndc(&proj, &view, c);
            assert_relative_eq!(ndc.x, ex, epsilon = 1e-9);
            assert_relative_eq!(ndc.y, ey, epsilon = 1e-9);
        }
    }

    #[test]
    fn projection_rejects_bad_inputs() {
        let f = frame(1.0, 1.0);
        assert!(offaxis_projection(&Vector3::new(0.5, 0.5, 0.0), &f, 0.05, 100.0).is_err());
        assert!(offaxis_projection(&Vector3::new(0.5, 0.5, 1.0), &f, 0.5, 0.1).is_err());
        assert!(offaxis_projection(&Vector3::new(0.5, 0.5, 1.0), &f, 0.0, 1.0).is_err());
    }

    #[test]
    fn centered_blit_is_full_texture() {
        let f = frame(0.8, 0.5);
        let r = blit_rectangle(&Vector3::new(0.4, 0.25, 1.0), &f, 1.0).unwrap();
        assert_eq!(r, Rect::unit());
    }

    #[test]
    fn blit_moves_against_the_viewer() {
        let f = frame(0.8, 0.5);
        let centered = blit_rectangle(&Vector3::new(0.4, 0.25, 1.0), &f, 1.3).unwrap();
        let right = blit_rectangle(&Vector3::new(0.45, 0.25, 1.0), &f, 1.3).unwrap();
        assert!(right.min.x < centered.min.x);
        assert_eq!(right.min.y, centered.min.y);
    }

    #[test]
    fn blit_reports_insufficient_overscan() {
        let f = frame(0.8, 0.5);
        let eye = Vector3::new(0.8, 0.25, 1.0);
        let err = blit_rectangle(&eye, &f, 1.3).unwrap_err();
        assert_eq!(err, GeometryError::InsufficientOverscan { required: 2.0, available: 1.3 });
        assert!(blit_rectangle(&eye, &f, 2.0).is_ok());
        assert!(blit_rectangle(&eye, &f, 0.9).is_err());
    }

    #[test]
    fn clip_plane_for_axial_viewer() {
        let f = frame(1.0, 1.0);
        let eye = Vector3::new(0.5, 0.5, 1.5);
        let view = mirrored_view(&eye, &f).unwrap();
        let plane = oblique_near_clip(&view, &f);
        assert_relative_eq!(plane, Vector4::new(0.0, 0.0, -1.0, -1.5), epsilon = 1e-12);
    }

    #[test]
    fn clip_plane_signs() {
        let rot = UnitQuaternion::from_euler_angles(-0.3, 0.9, 0.2);
        let f = MirrorFrame::from_rotation(Vector3::new(1.0, 0.2, 0.4), rot, 0.9, 0.5).unwrap();
        let eye = f.to_world(&Vector3::new(0.1, 0.3, 0.8));
        let view = mirrored_view(&eye, &f).unwrap();
        let plane = oblique_near_clip(&view, &f);
        let eval = |local: Vector3<f64>| plane.dot(&(view * f.to_world(&local).push(1.0)));
        for c in [Vector3::new(0.0, 0.0, 0.0), Vector3::new(0.9, 0.5, 0.0), Vector3::new(0.3, 0.1, 0.0)] {
            assert!(eval(c).abs() < 1e-12);
        }
        // 1 cm on the screen side of the glass reflects in front of the
        // camera, between it and the glass: clipped.
        assert!(eval(Vector3::new(0.4, 0.2, -0.01)) < 0.0);
        // Room-side geometry stays visible.
        assert!(eval(Vector3::new(0.4, 0.2, 0.01)) > 0.0);
        // The mirrored camera itself is on the clipped side.
        assert!(plane.w < 0.0);
    }

    #[test]
    fn eye_offset_moves_forward_and_down() {
        let pose = Pose::at(crate::EntityId::Viewer, Vector3::new(0.0, 1.7, 2.0), 0);
        let eye = EyeOffset::default().eye_position(&pose).unwrap();
        assert_relative_eq!(eye, Vector3::new(0.0, 1.65, 1.9), epsilon = 1e-15);
    }
}
