//! Per-entity pose histories and time-indexed sampling.

use std::collections::BTreeMap;

use nalgebra::UnitQuaternion;
use silhouette_core::{EntityId, Pose};

use crate::PoseIoError;

/// An entity with no sample closer than this to the query time is stale.
pub const STALENESS_WINDOW_US: u64 = 200_000;

/// At most one pose per entity.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PoseSet {
    poses: [Option<Pose>; 6],
}

impl PoseSet {
    pub fn get(&self, entity: EntityId) -> Option<&Pose> {
        self.poses[entity.code() as usize].as_ref()
    }

    pub fn insert(&mut self, pose: Pose) {
        self.poses[pose.entity.code() as usize] = Some(pose);
    }

    pub fn remove(&mut self, entity: EntityId) -> Option<Pose> {
        self.poses[entity.code() as usize].take()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Pose> {
        self.poses.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entities present here whose pose is older than the staleness window
    /// at `now_us`.
    pub fn stale_at(&self, now_us: u64) -> Vec<EntityId> {
        self.iter().filter(|p| now_us.saturating_sub(p.timestamp_us) > STALENESS_WINDOW_US).map(|p| p.entity).collect()
    }
}

impl FromIterator<Pose> for PoseSet {
    fn from_iter<I: IntoIterator<Item = Pose>>(iter: I) -> Self {
        let mut set = Self::default();
        for p in iter {
            set.insert(p);
        }
        set
    }
}

/// Time-ordered samples for every entity seen.
#[derive(Debug, Clone, Default)]
pub struct PoseTimeline {
    samples: BTreeMap<EntityId, Vec<Pose>>,
}

impl PoseTimeline {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a sample. Samples older than the entity's latest are ignored
    /// and reported as `false`; an equal timestamp replaces the latest.
    pub fn push(&mut self, pose: Pose) -> bool {
        let track = self.samples.entry(pose.entity).or_default();
        match track.last() {
            Some(last) if pose.timestamp_us < last.timestamp_us => false,
            Some(last) if pose.timestamp_us == last.timestamp_us => {
                *track.last_mut().unwrap() = pose;
                true
            }
            _ => {
                track.push(pose);
                true
            }
        }
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.samples.keys().copied()
    }

    pub fn track(&self, entity: EntityId) -> &[Pose] {
        self.samples.get(&entity).map_or(&[], Vec::as_slice)
    }

    /// Earliest and latest sample times over all entities.
    pub fn extent(&self) -> Option<(u64, u64)> {
        let first = self.samples.values().filter_map(|t| t.first()).map(|p| p.timestamp_us).min()?;
        let last = self.samples.values().filter_map(|t| t.last()).map(|p| p.timestamp_us).max()?;
        Some((first, last))
    }

    /// Poses of every known entity at `t_us`; fails listing all entities that
    /// have no sample within the staleness window.
    pub fn sample_at(&self, t_us: u64) -> Result<PoseSet, PoseIoError> {
        let (set, stale) = self.sample_partial(t_us);
        if stale.is_empty() {
            Ok(set)
        } else {
            Err(PoseIoError::Stale(stale))
        }
    }

    /// Like [`sample_at`](Self::sample_at) but returns what it can along with
    /// the stale entities.
    pub fn sample_partial(&self, t_us: u64) -> (PoseSet, Vec<EntityId>) {
        let mut set = PoseSet::default();
        let mut stale = Vec::new();
        for (&entity, track) in &self.samples {
            match sample_track(track, t_us) {
                Some(p) => set.insert(p),
                None => stale.push(entity),
            }
        }
        (set, stale)
    }
}

fn sample_track(track: &[Pose], t: u64) -> Option<Pose> {
    let after = track.partition_point(|p| p.timestamp_us <= t);
    let prev = after.checked_sub(1).map(|i| &track[i]);
    let next = track.get(after);
    match (prev, next) {
        (Some(p), _) if p.timestamp_us == t => Some(*p),
        (Some(p), Some(n)) => {
            if t - p.timestamp_us > STALENESS_WINDOW_US && n.timestamp_us - t > STALENESS_WINDOW_US {
                return None;
            }
            Some(interpolate(p, n, t))
        }
        (Some(p), None) if t - p.timestamp_us <= STALENESS_WINDOW_US => Some(Pose { timestamp_us: t, ..*p }),
        _ => None,
    }
}

/// Linear position and spherical orientation interpolation between two
/// samples of the same entity, `a.timestamp_us <= t <= b.timestamp_us`.
pub fn interpolate(a: &Pose, b: &Pose, t: u64) -> Pose {
    if t == a.timestamp_us {
        return *a;
    }
    if t == b.timestamp_us {
        return *b;
    }
    let f = (t - a.timestamp_us) as f64 / (b.timestamp_us - a.timestamp_us) as f64;
    let qa = UnitQuaternion::new_normalize(a.orientation);
    let qb = UnitQuaternion::new_normalize(b.orientation);
    // Antipodal inputs have no unique great arc; keep the earlier rotation.
    let q = qa.try_slerp(&qb, f, 1e-12).unwrap_or(qa);
    Pose { entity: a.entity, position: a.position.lerp(&b.position, f), orientation: q.into_inner(), timestamp_us: t }
}
