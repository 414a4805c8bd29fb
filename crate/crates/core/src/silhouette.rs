//! The dark overlay drawn where the player's reflection should show through.
//!
//! Every extent of the overlay is the reflection point of one extremal body
//! point (head top, feet, shoulders, hands), so apparent size follows the
//! viewer's distance automatically.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::mirror::{reflect_point_on_mirror, solve_reflection_1d, MirrorFrame, PlanarPoint, ReflectionPlane};
use crate::polygon::{clip_to_rect, Point2, Rect};
use crate::{GeometryError, Result};

/// Outline resolution of the oval variants.
pub const OVAL_VERTICES: usize = 64;

/// How far below the head the shoulder line sits, in meters.
pub const SHOULDER_DROP: f64 = 0.25;

/// Opacity change per unit of background luminance away from 0.5.
pub const DEFAULT_OPACITY_SLOPE: f64 = 0.8;

pub const MIN_ADAPTIVE_OPACITY: f64 = 0.2;

/// Normalized screen region in which outline vertices may lie; the overlay
/// may overhang the screen by half its size on every side.
pub const EXTENDED_BOUNDS: Rect = Rect { min: Point2::new(-0.5, -0.5), max: Point2::new(1.5, 1.5) };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SilhouetteVariant {
    DefaultOval,
    TransparentOval,
    NarrowOval,
    BodyWithArms,
}

impl SilhouetteVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            SilhouetteVariant::DefaultOval => "default_oval",
            SilhouetteVariant::TransparentOval => "transparent_oval",
            SilhouetteVariant::NarrowOval => "narrow_oval",
            SilhouetteVariant::BodyWithArms => "body_with_arms",
        }
    }
}

impl std::str::FromStr for SilhouetteVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            SilhouetteVariant::DefaultOval,
            SilhouetteVariant::TransparentOval,
            SilhouetteVariant::NarrowOval,
            SilhouetteVariant::BodyWithArms,
        ]
        .into_iter()
        .find(|v| v.as_str() == s)
        .ok_or_else(|| format!("unknown silhouette shape `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteShape {
    pub variant: SilhouetteVariant,
    /// 1 is fully black.
    pub opacity: f64,
    /// Multiplies the body half-width.
    pub width_scale: f64,
}

impl SilhouetteShape {
    /// The variant with its default opacity and width.
    pub fn preset(variant: SilhouetteVariant) -> Self {
        let (opacity, width_scale) = match variant {
            SilhouetteVariant::DefaultOval | SilhouetteVariant::BodyWithArms => (1.0, 1.0),
            SilhouetteVariant::TransparentOval => (0.5, 1.0),
            SilhouetteVariant::NarrowOval => (1.0, 0.5),
        };
        Self { variant, opacity, width_scale }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(format!("opacity must be in [0, 1], got {}", self.opacity));
        }
        if !(self.width_scale > 0.0 && self.width_scale <= 4.0) {
            return Err(format!("width_scale must be in (0, 4], got {}", self.width_scale));
        }
        Ok(())
    }
}

impl Default for SilhouetteShape {
    fn default() -> Self {
        Self::preset(SilhouetteVariant::DefaultOval)
    }
}

/// Body dimensions in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BodyModel {
    pub shoulder_half_width: f64,
    pub head_radius: f64,
    pub arm_radius: f64,
}

impl Default for BodyModel {
    fn default() -> Self {
        Self { shoulder_half_width: 0.25, head_radius: 0.12, arm_radius: 0.06 }
    }
}

impl BodyModel {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("shoulder_half_width", self.shoulder_half_width),
            ("head_radius", self.head_radius),
            ("arm_radius", self.arm_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Segment with a radius; endpoints share the coordinates of the owning
/// overlay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub a: Point2,
    pub b: Point2,
    pub radius: f64,
}

/// Overlay in normalized screen coordinates (`[0, 1]^2`, origin bottom-left,
/// axes as in the mirror frame).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouettePolygon {
    /// Counter-clockwise. Empty when the overlay has no area.
    pub outline: Vec<Point2>,
    pub opacity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm_capsules: Option<Vec<Capsule>>,
}

impl SilhouettePolygon {
    pub fn empty(opacity: f64) -> Self {
        Self { outline: Vec::new(), opacity, arm_capsules: None }
    }
}

fn reflect_axis(plane: ReflectionPlane, player: (f64, f64), viewer: (f64, f64)) -> Result<f64> {
    solve_reflection_1d(plane, PlanarPoint::new(player.0, player.1), PlanarPoint::new(viewer.0, viewer.1)).map(|r| r.s)
}

/// Box on the glass, in mirror-local meters, spanned by the reflections of
/// the player's extremal points.
///
/// `head`, `feet` and `viewer` are world positions. The top edge reflects the
/// head raised by the head radius, the bottom edge reflects the feet and the
/// sides reflect the head shifted sideways by the shoulder half-width. When
/// head and feet are at the same height the box collapses to zero height at
/// the reflected head.
pub fn silhouette_anchor_box(
    head: &Vector3<f64>,
    feet: &Vector3<f64>,
    viewer: &Vector3<f64>,
    frame: &MirrorFrame,
    body: &BodyModel,
) -> Result<Rect> {
    let h = frame.to_local(head);
    let f = frame.to_local(feet);
    let v = frame.to_local(viewer);
    if h.y < f.y {
        return Err(GeometryError::InvalidPose(format!(
            "head ({:.3} m) is below feet ({:.3} m) in the mirror frame",
            h.y, f.y
        )));
    }
    let sw = body.shoulder_half_width;
    let left = reflect_axis(ReflectionPlane::Xz, (h.x - sw, h.z), (v.x, v.z))?;
    let right = reflect_axis(ReflectionPlane::Xz, (h.x + sw, h.z), (v.x, v.z))?;
    let bottom = reflect_axis(ReflectionPlane::Yz, (f.y, f.z), (v.y, v.z))?;
    let top = if h.y == f.y {
        reflect_axis(ReflectionPlane::Yz, (h.y, h.z), (v.y, v.z))?
    } else {
        reflect_axis(ReflectionPlane::Yz, (h.y + body.head_radius, h.z), (v.y, v.z))?
    };
    Ok(Rect::new(Point2::new(left.min(right), bottom.min(top)), Point2::new(left.max(right), bottom.max(top))))
}

/// Inscribes the shape's oval in `anchor` (mirror-local meters) and converts
/// it to normalized screen coordinates.
///
/// Vertices beyond [`EXTENDED_BOUNDS`] are clipped away. A box with no area
/// gives an empty outline.
pub fn build_polygon(anchor: &Rect, shape: &SilhouetteShape, frame: &MirrorFrame) -> SilhouettePolygon {
    build_polygon_with(anchor, shape, frame, OVAL_VERTICES)
}

pub fn build_polygon_with(
    anchor: &Rect,
    shape: &SilhouetteShape,
    frame: &MirrorFrame,
    vertices: usize,
) -> SilhouettePolygon {
    let semi_x = 0.5 * anchor.width() * shape.width_scale / frame.width();
    let semi_y = 0.5 * anchor.height() / frame.height();
    if !(semi_x > 0.0 && semi_y > 0.0) || vertices < 3 {
        return SilhouettePolygon::empty(shape.opacity);
    }
    let c = anchor.center();
    let center = Point2::new(c.x / frame.width(), c.y / frame.height());
    let outline: Vec<Point2> = (0..vertices)
        .map(|i| {
            let t = TAU * i as f64 / vertices as f64;
            center + Point2::new(semi_x * t.cos(), semi_y * t.sin())
        })
        .collect();
    let outline = if outline.iter().all(|p| EXTENDED_BOUNDS.contains(p)) {
        outline
    } else {
        clip_to_rect(&outline, &EXTENDED_BOUNDS)
    };
    SilhouettePolygon { outline, opacity: shape.opacity, arm_capsules: None }
}

/// Arm overlays on the glass, in mirror-local meters: left then right.
///
/// Each capsule runs from the reflected shoulder (head lowered by
/// [`SHOULDER_DROP`], shifted sideways by the shoulder half-width) to the
/// reflected controller. The radius is half the reflected span of the
/// controller widened by the arm radius.
pub fn arm_capsules(
    controller_left: &Vector3<f64>,
    controller_right: &Vector3<f64>,
    head: &Vector3<f64>,
    viewer: &Vector3<f64>,
    frame: &MirrorFrame,
    body: &BodyModel,
) -> Result<[Capsule; 2]> {
    let h = frame.to_local(head);
    let v = frame.to_local(viewer);
    let arm = |controller: &Vector3<f64>, side: f64| -> Result<Capsule> {
        let shoulder = Vector3::new(h.x + side * body.shoulder_half_width, h.y - SHOULDER_DROP, h.z);
        let hand = frame.to_local(controller);
        let a = reflect_point_on_mirror(&shoulder, &v)?;
        let b = reflect_point_on_mirror(&hand, &v)?;
        let lo = reflect_axis(ReflectionPlane::Xz, (hand.x - body.arm_radius, hand.z), (v.x, v.z))?;
        let hi = reflect_axis(ReflectionPlane::Xz, (hand.x + body.arm_radius, hand.z), (v.x, v.z))?;
        Ok(Capsule { a, b, radius: 0.5 * (hi - lo).abs() })
    };
    Ok([arm(controller_left, -1.0)?, arm(controller_right, 1.0)?])
}

/// Converts glass-meter capsules to normalized screen coordinates. Radii are
/// normalized by the glass width.
pub fn normalize_capsules(capsules: &[Capsule], frame: &MirrorFrame) -> Vec<Capsule> {
    let scale = |p: Point2| Point2::new(p.x / frame.width(), p.y / frame.height());
    capsules.iter().map(|c| Capsule { a: scale(c.a), b: scale(c.b), radius: c.radius / frame.width() }).collect()
}

/// Darkens the overlay against bright backgrounds: a linear ramp through the
/// base opacity at luminance 0.5, clamped to `[0.2, 1]`.
pub fn adaptive_opacity(base: &SilhouetteShape, background_luminance: f64, slope: f64) -> f64 {
    if !background_luminance.is_finite() {
        return base.opacity.clamp(MIN_ADAPTIVE_OPACITY, 1.0);
    }
    let lum = background_luminance.clamp(0.0, 1.0);
    (base.opacity + slope * (lum - 0.5)).clamp(MIN_ADAPTIVE_OPACITY, 1.0)
}

/// World positions of the tracked player points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayerPoints {
    pub head: Vector3<f64>,
    /// Projected from the head to the floor when absent.
    pub feet: Option<Vector3<f64>>,
    /// Left, right.
    pub controllers: Option<[Vector3<f64>; 2]>,
}

/// Feet stand-in when no foot tracker exists: the head dropped to the floor
/// (world y-up).
pub fn floor_feet(head: &Vector3<f64>, floor_height: f64) -> Vector3<f64> {
    Vector3::new(head.x, floor_height, head.z)
}

/// Full overlay for one frame: oval from the anchor box, plus arm capsules
/// for [`SilhouetteVariant::BodyWithArms`] when both controllers are tracked.
pub fn compose_silhouette(
    player: &PlayerPoints,
    viewer: &Vector3<f64>,
    frame: &MirrorFrame,
    shape: &SilhouetteShape,
    body: &BodyModel,
    floor_height: f64,
) -> Result<SilhouettePolygon> {
    let feet = player.feet.unwrap_or_else(|| floor_feet(&player.head, floor_height));
    let anchor = silhouette_anchor_box(&player.head, &feet, viewer, frame, body)?;
    let mut poly = build_polygon(&anchor, shape, frame);
    if shape.variant == SilhouetteVariant::BodyWithArms {
        if let Some([left, right]) = player.controllers {
            let arms = arm_capsules(&left, &right, &player.head, viewer, frame, body)?;
            poly.arm_capsules = Some(normalize_capsules(&arms, frame));
        }
    }
    Ok(poly)
}
