//! First-order exponential smoothing of positions.
//!
//! For a sample arriving `dt` after the previous one the filter uses
//! `alpha = 1 - exp(-dt / tau)`, which makes the response independent of
//! the sample rate. Orientations pass through unchanged.

use std::collections::HashMap;

use nalgebra::Vector3;
use silhouette_core::{EntityId, Pose};

use crate::PoseIoError;

pub const DEFAULT_TAU_S: f64 = 0.03;
pub const MAX_TAU_S: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub position: Vector3<f64>,
    /// Smoothed finite-difference velocity, m/s.
    pub velocity: Vector3<f64>,
    pub timestamp_us: u64,
}

#[derive(Debug, Clone)]
pub struct Smoother {
    tau_s: f64,
    states: HashMap<EntityId, FilterState>,
    dropped: u64,
}

impl Default for Smoother {
    fn default() -> Self {
        Self::new(DEFAULT_TAU_S).unwrap()
    }
}

impl Smoother {
    pub fn new(tau_s: f64) -> Result<Self, PoseIoError> {
        if !(0.0..=MAX_TAU_S).contains(&tau_s) {
            return Err(PoseIoError::InvalidTau(tau_s));
        }
        Ok(Self { tau_s, states: HashMap::new(), dropped: 0 })
    }

    pub fn tau_s(&self) -> f64 {
        self.tau_s
    }

    /// Messages rejected for arriving older than the entity's filter state.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn state(&self, entity: EntityId) -> Option<&FilterState> {
        self.states.get(&entity)
    }

    pub fn reset(&mut self) {
        self.states.clear();
    }

    /// Feeds one raw pose and returns the filtered pose with the same
    /// timestamp, or `None` if the pose is older than the last one seen for
    /// its entity.
    pub fn smooth(&mut self, raw: &Pose) -> Option<Pose> {
        let prev = match self.states.get(&raw.entity) {
            None => {
                self.states.insert(
                    raw.entity,
                    FilterState { position: raw.position, velocity: Vector3::zeros(), timestamp_us: raw.timestamp_us },
                );
                return Some(*raw);
            }
            Some(prev) if raw.timestamp_us < prev.timestamp_us => {
                self.dropped += 1;
                log::warn!(
                    "dropping out-of-order {} pose at {} us (filter at {} us, {} dropped)",
                    raw.entity,
                    raw.timestamp_us,
                    prev.timestamp_us,
                    self.dropped
                );
                return None;
            }
            Some(prev) => *prev,
        };
        let dt = (raw.timestamp_us - prev.timestamp_us) as f64 * 1e-6;
        let alpha = if self.tau_s == 0.0 { 1.0 } else { 1.0 - (-dt / self.tau_s).exp() };
        let position = if alpha == 1.0 { raw.position } else { prev.position + alpha * (raw.position - prev.position) };
        let velocity = if dt > 0.0 {
            let instant = (position - prev.position) / dt;
            prev.velocity + alpha * (instant - prev.velocity)
        } else {
            prev.velocity
        };
        self.states.insert(raw.entity, FilterState { position, velocity, timestamp_us: raw.timestamp_us });
        Some(Pose { position, ..*raw })
    }
}
