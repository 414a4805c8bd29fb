//! Getting tracker poses into the geometry pipeline.
//!
//! Trackers send binary [`PoseMessage`]s (see [`wire`]). An [`Ingestor`]
//! validates them and maps sender timestamps onto the receiver clock, a
//! [`Smoother`] filters positions, and a [`PoseStore`] publishes the latest
//! pose of every entity as an atomic snapshot. Recorded sessions are
//! `.posetrace` files ([`trace`]) that can be replayed in real time or
//! deterministically ([`replay`]).

pub mod error;
pub mod ingest;
pub mod replay;
pub mod smooth;
pub mod store;
pub mod timeline;
pub mod trace;
pub mod wire;

pub use error::{PoseIoError, WireError};
pub use ingest::{IngestOutcome, Ingestor};
pub use smooth::Smoother;
pub use store::{PoseSnapshot, PoseStore};
pub use timeline::{PoseSet, PoseTimeline, STALENESS_WINDOW_US};
pub use trace::{PoseTrace, TraceHeader};
pub use wire::{Handshake, PoseMessage};
