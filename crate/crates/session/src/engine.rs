//! Per-tick geometry: one pose snapshot in, one [`FrameUpdate`] out.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use silhouette_core::analysis::{fov_report, silhouette_coverage, EventFlag, EventKind};
use silhouette_core::frustum::render_params;
use silhouette_core::silhouette::{compose_silhouette, PlayerPoints, SilhouetteVariant};
use silhouette_core::{EntityId, GeometryError, MirrorFrame, Pose};
use silhouette_pose_io::{PoseSet, STALENESS_WINDOW_US};
use thiserror::Error;

use crate::frame::{FrameGeometry, FrameUpdate};
use crate::SessionConfig;

/// Entities without which no geometry is computed.
pub const MANDATORY: [EntityId; 2] = [EntityId::Viewer, EntityId::PlayerHead];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TickError {
    #[error("stale: {}", .0.iter().map(|e| e.as_str()).collect::<Vec<_>>().join(", "))]
    Stale(Vec<EntityId>),
    #[error("no mirror pose: the mirror is untracked and no fixed pose is configured")]
    NoMirror,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn is_stale(pose: Option<&Pose>, now_us: u64) -> bool {
    pose.is_none_or(|p| now_us.saturating_sub(p.timestamp_us) > STALENESS_WINDOW_US)
}

fn fresh(poses: &PoseSet, entity: EntityId, now_us: u64) -> Option<&Pose> {
    poses.get(entity).filter(|p| !is_stale(Some(p), now_us))
}

/// The glass frame: the live mirror pose if one was ever received (held
/// when stale, since mirrors rarely move), else the configured fixed pose.
pub fn mirror_frame(config: &SessionConfig, poses: &PoseSet) -> Result<MirrorFrame, TickError> {
    let tracker = match (poses.get(EntityId::Mirror), &config.mirror.fixed_pose) {
        (Some(live), _) => *live,
        (None, Some(fixed)) => fixed.to_pose(0),
        (None, None) => return Err(TickError::NoMirror),
    };
    Ok(config.mirror.frame(&tracker)?)
}

/// Entities reported in staleness flags, with their flag.
pub fn staleness(config: &SessionConfig, poses: &PoseSet, now_us: u64) -> BTreeMap<EntityId, bool> {
    let mut relevant = MANDATORY.to_vec();
    if config.mirror.fixed_pose.is_none() {
        relevant.push(EntityId::Mirror);
    }
    if config.shape.variant == SilhouetteVariant::BodyWithArms {
        relevant.extend([EntityId::ControllerLeft, EntityId::ControllerRight]);
    }
    relevant.extend(poses.iter().map(|p| p.entity));
    relevant.into_iter().map(|e| (e, is_stale(poses.get(e), now_us))).collect()
}

/// Geometry for one snapshot. Pure: same inputs, same bits.
pub fn evaluate(config: &SessionConfig, poses: &PoseSet, now_us: u64) -> Result<FrameGeometry, TickError> {
    let stale: Vec<_> = MANDATORY.into_iter().filter(|&e| fresh(poses, e, now_us).is_none()).collect();
    if !stale.is_empty() {
        return Err(TickError::Stale(stale));
    }
    let frame = mirror_frame(config, poses)?;
    let viewer = fresh(poses, EntityId::Viewer, now_us).expect("checked above");
    let head = fresh(poses, EntityId::PlayerHead, now_us).expect("checked above");
    let eye = config.eye_offset.eye_position(viewer)?;
    let params = render_params(&eye, &frame, config.near_m, config.far_m, config.overscan)?;

    let position = |e| fresh(poses, e, now_us).map(|p: &Pose| p.position);
    let controllers = match (position(EntityId::ControllerLeft), position(EntityId::ControllerRight)) {
        (Some(l), Some(r)) => Some([l, r]),
        _ => None,
    };
    let player = PlayerPoints { head: head.position, feet: position(EntityId::PlayerFeet), controllers };
    let silhouette = compose_silhouette(&player, &eye, &frame, &config.shape, &config.body, config.floor_height_m)?;
    let coverage = silhouette_coverage(&silhouette);
    let eye_local = frame.to_local(&eye);
    let fov = fov_report(&eye_local, frame.width(), frame.height())?;
    Ok(FrameGeometry::new(&params, eye_local.into(), silhouette, coverage, fov))
}

/// Tick counter and last valid geometry of a running session.
#[derive(Debug, Clone)]
pub struct Session {
    config: SessionConfig,
    next_tick: u64,
    last_valid: Option<(u64, FrameGeometry)>,
    latest: Option<FrameUpdate>,
}

impl Session {
    pub fn new(config: SessionConfig) -> Self {
        Self { config, next_tick: 0, last_valid: None, latest: None }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn latest(&self) -> Option<&FrameUpdate> {
        self.latest.as_ref()
    }

    /// Computes the next frame. On failure the previous valid geometry is
    /// repeated with `held` set; it is never mixed with new values.
    /// `events` are teleports detected since the previous tick.
    pub fn tick(&mut self, poses: &PoseSet, now_us: u64, mut events: Vec<EventFlag>) -> FrameUpdate {
        let tick = self.next_tick;
        self.next_tick += 1;
        let stale = staleness(&self.config, poses, now_us);
        for e in stale.iter().filter(|(e, s)| **s && MANDATORY.contains(e)).map(|(e, _)| *e) {
            events.push(EventFlag { kind: EventKind::Stale, tick, magnitude: 0.0, entity: Some(e) });
        }
        let (geometry, geometry_tick, held, error) = match evaluate(&self.config, poses, now_us) {
            Ok(g) => {
                if g.coverage.coverage == 0.0 {
                    events.push(EventFlag {
                        kind: EventKind::SilhouetteOffscreen,
                        tick,
                        magnitude: 0.0,
                        entity: Some(EntityId::PlayerHead),
                    });
                }
                self.last_valid = Some((tick, g.clone()));
                (Some(g), Some(tick), false, None)
            }
            Err(e) => match &self.last_valid {
                Some((t, g)) => (Some(g.clone()), Some(*t), true, Some(e.to_string())),
                None => (None, None, false, Some(e.to_string())),
            },
        };
        for e in &mut events {
            e.tick = tick;
        }
        let frame = FrameUpdate {
            tick,
            timestamp_us: now_us,
            geometry,
            geometry_tick,
            held,
            stale,
            events,
            pose_timestamps: poses.iter().map(|p| (p.entity, p.timestamp_us)).collect(),
            error,
            digest: String::new(),
        }
        .seal();
        self.latest = Some(frame.clone());
        frame
    }

    /// Evaluates hypothetical poses and mirror dimensions without touching
    /// the session. Overrides replace the snapshot's poses and count as
    /// fresh. Changing the dimensions keeps the glass centered where it was.
    pub fn what_if(
        &self,
        snapshot: &PoseSet,
        overrides: &[Pose],
        mirror_dims: Option<(f64, f64)>,
        now_us: u64,
    ) -> Result<FrameUpdate, TickError> {
        what_if(&self.config, snapshot, overrides, mirror_dims, now_us, self.next_tick.saturating_sub(1))
    }
}

/// Free-standing form of [`Session::what_if`]; `tick` labels the result.
pub fn what_if(
    config: &SessionConfig,
    snapshot: &PoseSet,
    overrides: &[Pose],
    mirror_dims: Option<(f64, f64)>,
    now_us: u64,
    tick: u64,
) -> Result<FrameUpdate, TickError> {
    let mut poses = *snapshot;
    for p in overrides {
        if !p.is_finite() {
            return Err(GeometryError::NonFinite("override pose").into());
        }
        poses.insert(Pose { timestamp_us: now_us, ..*p });
    }
    let mut config = config.clone();
    if let Some((w, h)) = mirror_dims {
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(GeometryError::InvalidFrame(format!("mirror dimensions {w} x {h}")).into());
        }
        let current = mirror_frame(&config, &poses)?;
        let shift = Vector3::new(0.5 * (current.width() - w), 0.5 * (current.height() - h), 0.0);
        // Keep the tracker where it is and move the glass under it instead.
        let mount = config.mirror.mount();
        config.mirror.mount = Some(silhouette_core::MountOffset {
            translation: mount.translation + mount.rotation * shift,
            rotation: mount.rotation,
        });
        config.mirror.width_m = w;
        config.mirror.height_m = h;
    }
    let geometry = evaluate(&config, &poses, now_us)?;
    Ok(FrameUpdate {
        tick,
        timestamp_us: now_us,
        geometry: Some(geometry),
        geometry_tick: Some(tick),
        held: false,
        stale: staleness(&config, &poses, now_us),
        events: Vec::new(),
        pose_timestamps: poses.iter().map(|p| (p.entity, p.timestamp_us)).collect(),
        error: None,
        digest: String::new(),
    }
    .seal())
}
