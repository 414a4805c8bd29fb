//! Session configuration, loaded from JSON.

use std::net::IpAddr;
use std::path::Path;

use nalgebra::{Quaternion, Vector3};
use serde::{Deserialize, Serialize};
use silhouette_core::analysis::DEFAULT_TELEPORT_THRESHOLD_MPS;
use silhouette_core::frustum::{EyeOffset, DEFAULT_FAR, DEFAULT_NEAR, DEFAULT_OVERSCAN};
use silhouette_core::mirror::mirror_frame_from_pose;
use silhouette_core::silhouette::{BodyModel, SilhouetteShape};
use silhouette_core::{EntityId, MirrorFrame, MountOffset, Pose};
use silhouette_pose_io::smooth::{DEFAULT_TAU_S, MAX_TAU_S};
use silhouette_pose_io::TraceHeader;
use thiserror::Error;

pub const DEFAULT_INGEST_PORT: u16 = 47800;
pub const DEFAULT_SERVE_PORT: u16 = 47801;
pub const DEFAULT_TICK_RATE_HZ: f64 = 90.0;
pub const TICK_RATE_RANGE: (f64, f64) = (10.0, 240.0);

/// 24″ 16:9 panel.
pub const DEFAULT_MIRROR_WIDTH_M: f64 = 0.531_311;
pub const DEFAULT_MIRROR_HEIGHT_M: f64 = 0.298_863;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid { field: field.into(), message: message.into() }
    }
}

/// Pose of the mirror tracker to assume when no live mirror pose has arrived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPose {
    pub position: [f64; 3],
    /// `[x, y, z, w]`.
    pub orientation: [f64; 4],
}

impl FixedPose {
    pub fn to_pose(&self, timestamp_us: u64) -> Pose {
        let [x, y, z, w] = self.orientation;
        Pose {
            entity: EntityId::Mirror,
            position: Vector3::from(self.position),
            orientation: Quaternion::new(w, x, y, z),
            timestamp_us,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MirrorConfig {
    pub width_m: f64,
    pub height_m: f64,
    /// Tracker-to-glass offset. Defaults to a tracker centered on the top
    /// edge with axes aligned to the glass.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mount: Option<MountOffset>,
    /// Used until a live mirror pose arrives. Without it the mirror must be
    /// tracked.
    pub fixed_pose: Option<FixedPose>,
}

impl Default for MirrorConfig {
    fn default() -> Self {
        Self {
            width_m: DEFAULT_MIRROR_WIDTH_M,
            height_m: DEFAULT_MIRROR_HEIGHT_M,
            mount: None,
            // Glass bottom edge 1 m above the floor, facing +z.
            fixed_pose: Some(FixedPose {
                position: [0.0, 1.0 + DEFAULT_MIRROR_HEIGHT_M, 0.0],
                orientation: [0.0, 0.0, 0.0, 1.0],
            }),
        }
    }
}

impl MirrorConfig {
    pub fn mount(&self) -> MountOffset {
        self.mount.unwrap_or_else(|| MountOffset::top_center(self.width_m, self.height_m))
    }

    /// Glass frame for a mirror tracker pose.
    pub fn frame(&self, tracker: &Pose) -> silhouette_core::Result<MirrorFrame> {
        mirror_frame_from_pose(tracker, &self.mount(), self.width_m, self.height_m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub bind: IpAddr,
    /// UDP tracker ingest. 0 picks a free port.
    pub ingest_port: u16,
    /// HTTP/WebSocket. 0 picks a free port.
    pub serve_port: u16,
    /// Frames buffered per client before it is disconnected as too slow.
    pub client_queue: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            bind: IpAddr::from([127, 0, 0, 1]),
            ingest_port: DEFAULT_INGEST_PORT,
            serve_port: DEFAULT_SERVE_PORT,
            client_queue: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub mirror: MirrorConfig,
    pub body: BodyModel,
    pub shape: SilhouetteShape,
    pub eye_offset: EyeOffset,
    /// World y of the floor, used for the feet when they are not tracked.
    pub floor_height_m: f64,
    pub smoothing_tau_s: f64,
    pub tick_rate_hz: f64,
    pub near_m: f64,
    pub far_m: f64,
    pub overscan: f64,
    pub teleport_threshold_mps: f64,
    pub deterministic: bool,
    pub network: NetworkConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            mirror: MirrorConfig::default(),
            body: BodyModel::default(),
            shape: SilhouetteShape::default(),
            eye_offset: EyeOffset::default(),
            floor_height_m: 0.0,
            smoothing_tau_s: DEFAULT_TAU_S,
            tick_rate_hz: DEFAULT_TICK_RATE_HZ,
            near_m: DEFAULT_NEAR,
            far_m: DEFAULT_FAR,
            overscan: DEFAULT_OVERSCAN,
            teleport_threshold_mps: DEFAULT_TELEPORT_THRESHOLD_MPS,
            deterministic: false,
            network: NetworkConfig::default(),
        }
    }
}

impl SessionConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse { path: path.display().to_string(), source },
            other => other,
        })
    }

    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self =
            serde_json::from_str(text).map_err(|source| ConfigError::Parse { path: "<inline>".into(), source })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn tick_period_us(&self) -> u64 {
        (1e6 / self.tick_rate_hz).round() as u64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::invalid(field, format!("must be positive and finite, got {v}")))
            }
        };
        positive("mirror.width_m", self.mirror.width_m)?;
        positive("mirror.height_m", self.mirror.height_m)?;
        if let Some(mount) = &self.mirror.mount {
            if !mount.translation.iter().all(|v| v.is_finite()) {
                return Err(ConfigError::invalid("mirror.mount.translation", "must be finite"));
            }
        }
        if let Some(fixed) = &self.mirror.fixed_pose {
            if !fixed.position.iter().chain(&fixed.orientation).all(|v| v.is_finite()) {
                return Err(ConfigError::invalid("mirror.fixed_pose", "must be finite"));
            }
            self.mirror
                .frame(&fixed.to_pose(0))
                .map_err(|e| ConfigError::invalid("mirror.fixed_pose.orientation", e.to_string()))?;
        }
        self.body.validate().map_err(|m| ConfigError::invalid("body", m))?;
        self.shape.validate().map_err(|m| ConfigError::invalid("shape", m))?;
        for (field, v) in [("eye_offset.forward", self.eye_offset.forward), ("eye_offset.down", self.eye_offset.down)] {
            if !v.is_finite() {
                return Err(ConfigError::invalid(field, "must be finite"));
            }
        }
        if !self.floor_height_m.is_finite() {
            return Err(ConfigError::invalid("floor_height_m", "must be finite"));
        }
        if !(0.0..=MAX_TAU_S).contains(&self.smoothing_tau_s) {
            return Err(ConfigError::invalid(
                "smoothing_tau_s",
                format!("must be in [0, {MAX_TAU_S}], got {}", self.smoothing_tau_s),
            ));
        }
        let (lo, hi) = TICK_RATE_RANGE;
        if !(lo..=hi).contains(&self.tick_rate_hz) {
            return Err(ConfigError::invalid(
                "tick_rate_hz",
                format!("must be in [{lo}, {hi}], got {}", self.tick_rate_hz),
            ));
        }
        positive("near_m", self.near_m)?;
        if !(self.far_m > self.near_m && self.far_m.is_finite()) {
            return Err(ConfigError::invalid(
                "far_m",
                format!("must be finite and greater than near_m ({}), got {}", self.near_m, self.far_m),
            ));
        }
        if !(1.0..=8.0).contains(&self.overscan) {
            return Err(ConfigError::invalid("overscan", format!("must be in [1, 8], got {}", self.overscan)));
        }
        positive("teleport_threshold_mps", self.teleport_threshold_mps)?;
        let net = &self.network;
        if net.ingest_port != 0 && net.ingest_port == net.serve_port {
            return Err(ConfigError::invalid(
                "network.serve_port",
                format!("must differ from network.ingest_port ({})", net.ingest_port),
            ));
        }
        if net.client_queue == 0 {
            return Err(ConfigError::invalid("network.client_queue", "must be at least 1"));
        }
        Ok(())
    }

    /// Trace header describing this configuration's geometry.
    pub fn trace_header(&self, start_epoch_us: u64) -> TraceHeader {
        TraceHeader::new(self.mirror.width_m, self.mirror.height_m, self.mirror.mount(), self.body, start_epoch_us)
    }
}
