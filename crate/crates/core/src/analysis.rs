//! Field-of-view, coverage and discontinuity metrics.

use std::collections::HashMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::polygon::{area, clip_to_rect, Rect};
use crate::pose::{EntityId, Pose};
use crate::silhouette::SilhouettePolygon;
use crate::{GeometryError, Result};

pub const METERS_PER_INCH: f64 = 0.0254;

/// Implied speed above which a jump counts as a teleport.
pub const DEFAULT_TELEPORT_THRESHOLD_MPS: f64 = 10.0;

/// Width and height in meters of a panel with the given diagonal and aspect.
pub fn panel_dims(diagonal_in: f64, aspect_w: f64, aspect_h: f64) -> (f64, f64) {
    let diag = diagonal_in * METERS_PER_INCH;
    let norm = aspect_w.hypot(aspect_h);
    (diag * aspect_w / norm, diag * aspect_h / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovReport {
    pub horizontal_deg: f64,
    pub vertical_deg: f64,
    pub solid_angle_sr: f64,
    pub diagonal_in: f64,
    pub width_m: f64,
    pub height_m: f64,
    pub viewer_depth_m: f64,
}

/// Angles subtended by a `width x height` glass at a mirror-local eye.
///
/// Off-center eyes are handled exactly: the horizontal angle is measured
/// between the rays to the left and right edges, the vertical one between the
/// bottom and top edges, and the solid angle is that of the full rectangle.
pub fn fov_report(viewer_local: &Vector3<f64>, width: f64, height: f64) -> Result<FovReport> {
    if !viewer_local.iter().all(|v| v.is_finite()) {
        return Err(GeometryError::NonFinite("viewer position"));
    }
    if viewer_local.z <= 0.0 {
        return Err(GeometryError::BehindMirror { subject: "viewer", depth: viewer_local.z });
    }
    if !(width > 0.0 && height > 0.0) {
        return Err(GeometryError::InvalidFrame(format!("screen {width} x {height}")));
    }
    let (x, y, z) = (viewer_local.x, viewer_local.y, viewer_local.z);
    let horizontal = (width - x).atan2(z) + x.atan2(z);
    let vertical = (height - y).atan2(z) + y.atan2(z);

    let corners = [
        Vector3::new(-x, -y, -z),
        Vector3::new(width - x, -y, -z),
        Vector3::new(width - x, height - y, -z),
        Vector3::new(-x, height - y, -z),
    ];
    let solid = triangle_solid_angle(&corners[0], &corners[1], &corners[2])
        + triangle_solid_angle(&corners[0], &corners[2], &corners[3]);

    Ok(FovReport {
        horizontal_deg: horizontal.to_degrees(),
        vertical_deg: vertical.to_degrees(),
        solid_angle_sr: solid,
        diagonal_in: width.hypot(height) / METERS_PER_INCH,
        width_m: width,
        height_m: height,
        viewer_depth_m: z,
    })
}

/// Van Oosterom-Strackee solid angle of the triangle `abc` seen from the
/// origin.
fn triangle_solid_angle(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let numerator = a.dot(&b.cross(c)).abs();
    let denominator = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
    2.0 * numerator.atan2(denominator)
}

/// How much of the overlay lands on the screen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    /// Area of overlay and screen intersection, as a fraction of the screen.
    pub coverage: f64,
    /// Overlay area outside the screen, in the same units.
    pub overflow: f64,
    /// Share of the overlay's own area that lies outside the screen.
    pub overflow_fraction: f64,
}

pub fn silhouette_coverage(poly: &SilhouettePolygon) -> Coverage {
    let total = area(&poly.outline);
    if total == 0.0 {
        return Coverage { coverage: 0.0, overflow: 0.0, overflow_fraction: 0.0 };
    }
    let inside = area(&clip_to_rect(&poly.outline, &Rect::unit())).min(total);
    let overflow = total - inside;
    Coverage { coverage: inside.clamp(0.0, 1.0), overflow, overflow_fraction: overflow / total }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Teleport,
    Stale,
    SilhouetteOffscreen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventFlag {
    pub kind: EventKind,
    pub tick: u64,
    /// Meters for teleports, zero otherwise.
    pub magnitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<EntityId>,
}

/// Flags a jump between two consecutive poses whose implied speed exceeds
/// `threshold_mps`. The magnitude is the displacement.
pub fn detect_teleport(prev: &Pose, next: &Pose, dt_s: f64, threshold_mps: f64) -> Option<EventFlag> {
    if dt_s.is_nan() || dt_s <= 0.0 {
        return None;
    }
    let displacement = (next.position - prev.position).norm();
    (displacement / dt_s > threshold_mps).then_some(EventFlag {
        kind: EventKind::Teleport,
        tick: 0,
        magnitude: displacement,
        entity: Some(next.entity),
    })
}

/// Runs [`detect_teleport`] over a stream of raw poses, keeping the previous
/// sample per entity so interleaved entities do not interfere.
#[derive(Debug, Clone)]
pub struct TeleportDetector {
    threshold_mps: f64,
    watched: Vec<EntityId>,
    last: HashMap<EntityId, Pose>,
}

impl TeleportDetector {
    pub fn new(threshold_mps: f64, watched: &[EntityId]) -> Self {
        Self { threshold_mps, watched: watched.to_vec(), last: HashMap::new() }
    }

    /// Watches the player's head.
    pub fn for_player(threshold_mps: f64) -> Self {
        Self::new(threshold_mps, &[EntityId::PlayerHead])
    }

    pub fn threshold_mps(&self) -> f64 {
        self.threshold_mps
    }

    pub fn observe(&mut self, pose: &Pose) -> Option<EventFlag> {
        if !self.watched.contains(&pose.entity) {
            return None;
        }
        let flag = match self.last.get(&pose.entity) {
            Some(prev) if pose.timestamp_us > prev.timestamp_us => {
                let dt = (pose.timestamp_us - prev.timestamp_us) as f64 * 1e-6;
                detect_teleport(prev, pose, dt, self.threshold_mps)
            }
            Some(prev) if pose.timestamp_us < prev.timestamp_us => return None,
            _ => None,
        };
        self.last.insert(pose.entity, *pose);
        flag
    }
}
