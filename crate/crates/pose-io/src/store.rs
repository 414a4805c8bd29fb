//! Latest-pose snapshot shared between ingest and the tick loop.

use std::sync::Arc;

use arc_swap::ArcSwap;
use silhouette_core::Pose;

use crate::PoseSet;

/// One consistent view of the latest pose of every entity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoseSnapshot {
    pub poses: PoseSet,
    /// Incremented by every published update.
    pub version: u64,
}

/// Lock-free publication of [`PoseSnapshot`]s: writers swap in a new
/// snapshot, readers never block and never observe a partial update.
#[derive(Debug, Default)]
pub struct PoseStore {
    current: ArcSwap<PoseSnapshot>,
}

impl PoseStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> Arc<PoseSnapshot> {
        self.current.load_full()
    }

    /// Replaces one entity's pose unless the stored one is newer.
    pub fn update(&self, pose: Pose) {
        self.update_many(&[pose]);
    }

    /// Publishes several poses as a single snapshot.
    pub fn update_many(&self, poses: &[Pose]) {
        self.current.rcu(|cur| {
            let mut next = PoseSnapshot::clone(cur);
            for p in poses {
                let newer = next.poses.get(p.entity).is_none_or(|old| old.timestamp_us <= p.timestamp_us);
                if newer {
                    next.poses.insert(*p);
                }
            }
            next.version += 1;
            next
        });
    }

    pub fn replace(&self, poses: PoseSet) {
        self.current.rcu(|cur| PoseSnapshot { poses, version: cur.version + 1 });
    }
}
