//! Geometry for a one-way-mirror spectator display.
//!
//! A viewer stands in front of a tracked one-way mirror with a screen behind it
//! while a player in a head-mounted display moves around the same room. This
//! crate computes, from their poses:
//!
//! - where on the glass the viewer sees the player's reflection ([`mirror`]),
//! - the dark overlay that lets that reflection show through ([`silhouette`]),
//! - the mirrored, viewer-dependent camera used to render the virtual world
//!   onto the screen ([`frustum`]),
//! - metrics such as field of view and silhouette coverage ([`analysis`]).
//!
//! All functions are pure and all values are plain data.

pub mod analysis;
pub mod error;
pub mod frustum;
pub mod mirror;
pub mod polygon;
pub mod pose;
pub mod silhouette;

pub use error::GeometryError;
pub use mirror::{MirrorFrame, MountOffset};
pub use pose::{EntityId, Pose};

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;
