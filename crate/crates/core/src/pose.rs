//! Tracked entities and their rigid poses.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::GeometryError;

/// Maximum deviation of a pose quaternion from unit norm.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Role of a tracked entity.
///
/// The discriminant is the on-wire entity code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum EntityId {
    Viewer = 0,
    PlayerHead = 1,
    PlayerFeet = 2,
    ControllerLeft = 3,
    ControllerRight = 4,
    Mirror = 5,
}

impl EntityId {
    pub const ALL: [EntityId; 6] = [
        EntityId::Viewer,
        EntityId::PlayerHead,
        EntityId::PlayerFeet,
        EntityId::ControllerLeft,
        EntityId::ControllerRight,
        EntityId::Mirror,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntityId::Viewer => "viewer",
            EntityId::PlayerHead => "player_head",
            EntityId::PlayerFeet => "player_feet",
            EntityId::ControllerLeft => "controller_left",
            EntityId::ControllerRight => "controller_right",
            EntityId::Mirror => "mirror",
        }
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|e| e.as_str() == s).ok_or_else(|| format!("unknown entity id `{s}`"))
    }
}

/// Timestamped rigid transform of a tracked entity, in the world frame.
///
/// The orientation is kept as a raw quaternion so that calibration code can
/// reject a tracker reporting a non-unit rotation instead of silently
/// renormalizing it. Use [`Pose::rotation`] to obtain a checked rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub entity: EntityId,
    /// Meters, world frame.
    pub position: Vector3<f64>,
    pub orientation: Quaternion<f64>,
    /// Microseconds, monotonic per entity.
    pub timestamp_us: u64,
}

impl Pose {
    pub fn new(entity: EntityId, position: Vector3<f64>, orientation: UnitQuaternion<f64>, timestamp_us: u64) -> Self {
        Self { entity, position, orientation: orientation.into_inner(), timestamp_us }
    }

    /// A pose with identity orientation.
    pub fn at(entity: EntityId, position: Vector3<f64>, timestamp_us: u64) -> Self {
        Self::new(entity, position, UnitQuaternion::identity(), timestamp_us)
    }

    pub fn is_normalized(&self) -> bool {
        (self.orientation.norm() - 1.0).abs() <= UNIT_NORM_TOLERANCE
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite()) && self.orientation.coords.iter().all(|v| v.is_finite())
    }

    /// The orientation as a rotation, rejecting quaternions that are off unit
    /// norm by more than [`UNIT_NORM_TOLERANCE`].
    pub fn rotation(&self) -> Result<UnitQuaternion<f64>, GeometryError> {
        if !self.is_finite() {
            return Err(GeometryError::NonFinite("pose"));
        }
        if !self.is_normalized() {
            return Err(GeometryError::InvalidPose(format!(
                "{} orientation has norm {}",
                self.entity,
                self.orientation.norm()
            )));
        }
        Ok(UnitQuaternion::new_normalize(self.orientation))
    }
}
