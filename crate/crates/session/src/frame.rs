//! Messages streamed to renderer clients.
//!
//! Every message is a JSON object with a `type` field: `config` on connect,
//! then one `frame` per tick; `error` before the server closes a connection.
//! Matrices are 16-element column-major arrays, points are `[x, y]` in
//! normalized screen coordinates (origin bottom-left of the glass, 1 at the
//! top-right corner).

use std::collections::BTreeMap;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use silhouette_core::analysis::{Coverage, EventFlag, FovReport};
use silhouette_core::frustum::RenderParams;
use silhouette_core::polygon::Rect;
use silhouette_core::silhouette::SilhouettePolygon;
use silhouette_core::EntityId;

use crate::SessionConfig;

pub const PROTOCOL_VERSION: u32 = 1;

/// Geometry computed from one pose snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameGeometry {
    /// World to mirrored camera.
    pub view_matrix: [f64; 16],
    /// Off-axis projection for rendering straight to the screen.
    pub projection_matrix: [f64; 16],
    /// Symmetric projection for the overscanned intermediate texture.
    pub texture_projection: [f64; 16],
    /// Camera-space plane `(a, b, c, d)`; geometry with `ax+by+cz+d < 0` lies
    /// in front of the glass and must be clipped.
    pub oblique_clip_plane: [f64; 4],
    /// Texture-space rectangle to show on screen.
    pub blit_rect: Rect,
    /// Overscan actually used; may exceed the configured one.
    pub overscan: f64,
    pub near: f64,
    pub far: f64,
    /// Eye position in the mirror frame, meters.
    pub eye_local: [f64; 3],
    pub silhouette: SilhouettePolygon,
    pub coverage: Coverage,
    pub fov: FovReport,
}

impl FrameGeometry {
    pub fn new(
        params: &RenderParams,
        eye_local: [f64; 3],
        silhouette: SilhouettePolygon,
        coverage: Coverage,
        fov: FovReport,
    ) -> Self {
        Self {
            view_matrix: mat(&params.view_matrix),
            projection_matrix: mat(&params.projection_matrix),
            texture_projection: mat(&params.texture_projection),
            oblique_clip_plane: vec4(&params.oblique_clip_plane),
            blit_rect: params.texture_blit,
            overscan: params.overscan,
            near: params.near,
            far: params.far,
            eye_local,
            silhouette,
            coverage,
            fov,
        }
    }

    pub fn view(&self) -> Matrix4<f64> {
        Matrix4::from_column_slice(&self.view_matrix)
    }

    pub fn projection(&self) -> Matrix4<f64> {
        Matrix4::from_column_slice(&self.projection_matrix)
    }

    pub fn is_finite(&self) -> bool {
        self.view_matrix
            .iter()
            .chain(&self.projection_matrix)
            .chain(&self.texture_projection)
            .chain(&self.oblique_clip_plane)
            .all(|v| v.is_finite())
    }
}

fn mat(m: &Matrix4<f64>) -> [f64; 16] {
    m.as_slice().try_into().expect("4x4")
}

fn vec4(v: &Vector4<f64>) -> [f64; 4] {
    [v.x, v.y, v.z, v.w]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameUpdate {
    pub tick: u64,
    /// Session clock (trace clock when replaying), microseconds.
    pub timestamp_us: u64,
    /// `None` until the first tick with fresh mandatory poses.
    pub geometry: Option<FrameGeometry>,
    /// Tick whose poses produced `geometry`; older than `tick` when held.
    pub geometry_tick: Option<u64>,
    /// True when `geometry` is repeated from an earlier tick.
    pub held: bool,
    /// Staleness of every entity the session uses or has seen.
    pub stale: BTreeMap<EntityId, bool>,
    pub events: Vec<EventFlag>,
    /// Timestamps of the poses in the snapshot this tick read.
    pub pose_timestamps: BTreeMap<EntityId, u64>,
    /// Why geometry could not be computed this tick.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// SHA-256 over the rest of the frame, lowercase hex.
    pub digest: String,
}

impl FrameUpdate {
    /// Hash of the canonical JSON form with an empty digest field.
    pub fn compute_digest(&self) -> String {
        let mut body = self.clone();
        body.digest.clear();
        let bytes = serde_json::to_vec(&body).expect("frame serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn seal(mut self) -> Self {
        self.digest = self.compute_digest();
        self
    }

    /// The frame without tick, timestamp and digest, for comparing geometry
    /// across ticks.
    pub fn content(&self) -> (Option<&FrameGeometry>, &BTreeMap<EntityId, bool>, &[EventFlag]) {
        (self.geometry.as_ref(), &self.stale, &self.events)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Config {
        protocol_version: u32,
        /// Tick of the most recent frame.
        tick: u64,
        config: Box<SessionConfig>,
    },
    Frame(Box<FrameUpdate>),
    Error {
        code: String,
        message: String,
    },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("message serializes")
    }
}

/// SHA-256 over a sequence of frame digests, for whole-run comparisons.
pub fn run_digest<'a>(frame_digests: impl IntoIterator<Item = &'a str>) -> String {
    let mut h = Sha256::new();
    for d in frame_digests {
        h.update(d.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}
