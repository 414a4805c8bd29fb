use silhouette_core::EntityId;
use thiserror::Error;

/// Rejection reasons for a binary pose frame. Each malformation has its own
/// variant so callers can count them separately.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("truncated frame: `{field}` needs bytes {start}..{end}, frame has {available}")]
    Truncated { field: &'static str, start: usize, end: usize, available: usize },
    #[error("length prefix says {declared} payload bytes, expected {expected}")]
    BadLength { declared: u32, expected: u32 },
    #[error("{extra} trailing bytes after frame")]
    TrailingBytes { extra: usize },
    #[error("unknown entity id {0}")]
    UnknownEntity(u8),
    #[error("non-finite value in `{field}`")]
    NonFinite { field: &'static str },
    #[error("orientation norm {norm} is not unit")]
    NotUnitQuaternion { norm: f32 },
    #[error("handshake: {0}")]
    Handshake(String),
}

#[derive(Debug, Error)]
pub enum PoseIoError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("stale entities: {}", list(.0))]
    Stale(Vec<EntityId>),
    #[error("smoothing time constant {0} s outside [0, 0.5]")]
    InvalidTau(f64),
    #[error("trace line {line}: {reason}")]
    Trace { line: usize, reason: String },
    #[error("trace header does not match the session config: {}", .0.join("; "))]
    HeaderMismatch(Vec<String>),
    #[error("replay speed must be positive and finite, got {0}")]
    InvalidSpeed(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn list(entities: &[EntityId]) -> String {
    entities.iter().map(|e| e.as_str()).collect::<Vec<_>>().join(", ")
}
