//! Scripted tracker sessions for demos, the bundled reference trace and
//! tests. Motion is built from sinusoids, so output depends only on the
//! script.

use nalgebra::{UnitQuaternion, Vector3};
use silhouette_core::{EntityId, Pose};
use silhouette_pose_io::{PoseMessage, PoseTrace};

use crate::SessionConfig;

const VIEWER_SENDER: u32 = 1;
const PLAYER_SENDER: u32 = 2;
const MIRROR_SENDER: u32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    pub duration_s: f64,
    pub rate_hz: f64,
    /// Timestamp of the first sample, microseconds.
    pub start_us: u64,
    /// `(time, displacement)`: the player jumps by `displacement` at `time`.
    pub teleports: Vec<(f64, Vector3<f64>)>,
    /// `(entity, from, to)`: no samples for `entity` in `[from, to)`.
    pub dropouts: Vec<(EntityId, f64, f64)>,
    /// Mirror tracker sample rate; 0 leaves the mirror untracked.
    pub mirror_rate_hz: f64,
}

impl Default for Script {
    fn default() -> Self {
        Self {
            duration_s: 5.0,
            rate_hz: 90.0,
            start_us: 1_000_000,
            teleports: Vec::new(),
            dropouts: Vec::new(),
            mirror_rate_hz: 0.0,
        }
    }
}

/// Viewer swaying in front of the glass.
pub fn viewer_position(t: f64) -> Vector3<f64> {
    Vector3::new(0.15 * (0.5 * t).sin(), 1.65 + 0.02 * (1.3 * t).sin(), 0.9 + 0.25 * (0.3 * t).sin())
}

/// Player head walking an ellipse, before any teleport offset. Peak speed
/// is about 0.5 m/s.
pub fn player_walk(t: f64) -> Vector3<f64> {
    Vector3::new(0.9 * (0.45 * t).sin(), 1.72 + 0.03 * (3.0 * t).sin(), 2.2 + 0.6 * (0.45 * t).cos())
}

impl Script {
    /// The player's head at `t`, including teleports.
    pub fn player_head(&self, t: f64) -> Vector3<f64> {
        let jumped: Vector3<f64> = self.teleports.iter().filter(|(at, _)| *at <= t).map(|(_, d)| d).sum();
        player_walk(t) + jumped
    }

    fn dropped(&self, entity: EntityId, t: f64) -> bool {
        self.dropouts.iter().any(|(e, from, to)| *e == entity && (*from..*to).contains(&t))
    }

    /// All tracker messages, sorted by timestamp.
    pub fn trace(&self, config: &SessionConfig) -> PoseTrace {
        let mut trace = PoseTrace::new(config.trace_header(1_700_000_000_000_000));
        let mut poses: Vec<(u32, Pose)> = Vec::new();
        let samples = (self.duration_s * self.rate_hz).floor() as u64;
        let facing_mirror = UnitQuaternion::identity();
        for k in 0..=samples {
            let t = k as f64 / self.rate_hz;
            let base = self.start_us + (t * 1e6).round() as u64;
            let head = self.player_head(t);
            let yaw = UnitQuaternion::from_euler_angles(0.0, 0.6 * (0.45 * t).cos(), 0.0);
            let side = yaw * Vector3::x();
            let swing = 0.25 * (2.0 * t).sin();
            let entities = [
                (EntityId::Viewer, VIEWER_SENDER, viewer_position(t), facing_mirror, 0),
                (EntityId::PlayerHead, PLAYER_SENDER, head, yaw, 300),
                (EntityId::PlayerFeet, PLAYER_SENDER, Vector3::new(head.x, 0.05, head.z), yaw, 600),
                (
                    EntityId::ControllerLeft,
                    PLAYER_SENDER,
                    head - 0.3 * side + Vector3::new(0.0, -0.45 + swing, 0.1),
                    yaw,
                    900,
                ),
                (
                    EntityId::ControllerRight,
                    PLAYER_SENDER,
                    head + 0.3 * side + Vector3::new(0.0, -0.45 - swing, 0.1),
                    yaw,
                    1_200,
                ),
            ];
            for (entity, sender, position, rotation, stagger) in entities {
                if !self.dropped(entity, t) {
                    poses.push((sender, Pose::new(entity, position, rotation, base + stagger)));
                }
            }
        }
        if self.mirror_rate_hz > 0.0 {
            if let Some(fixed) = config.mirror.fixed_pose {
                let n = (self.duration_s * self.mirror_rate_hz).floor() as u64;
                for k in 0..=n {
                    let t = k as f64 / self.mirror_rate_hz;
                    poses.push((MIRROR_SENDER, fixed.to_pose(self.start_us + (t * 1e6).round() as u64 + 50)));
                }
            }
        }
        poses.sort_by_key(|(_, p)| p.timestamp_us);
        let mut seq = [0u64; 4];
        for (sender, pose) in poses {
            let s = &mut seq[sender as usize];
            trace.messages.push(PoseMessage::from_pose(&pose, sender, *s));
            *s += 1;
        }
        trace
    }
}

/// The session bundled with the repository: 6 s with two teleports, a
/// half-second player dropout and a tracked mirror.
pub fn reference_script() -> Script {
    Script {
        duration_s: 6.0,
        teleports: vec![(2.0, Vector3::new(3.2, 0.0, 0.0)), (4.5, Vector3::new(-3.2, 0.0, 0.5))],
        dropouts: vec![(EntityId::PlayerHead, 3.0, 3.5)],
        mirror_rate_hz: 2.0,
        ..Script::default()
    }
}
