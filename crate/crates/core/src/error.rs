use thiserror::Error;

/// Errors raised by the geometry routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    /// A point that must be in front of the glass (local z > 0) is not.
    #[error("{subject} is not in front of the mirror (local depth {depth} m)")]
    BehindMirror { subject: &'static str, depth: f64 },

    #[error("degenerate reflection: player and viewer coincide on the glass")]
    Degenerate,

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("invalid mirror frame: {0}")]
    InvalidFrame(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid clip range: near {near} m, far {far} m")]
    ClipRange { near: f64, far: f64 },

    #[error("insufficient overscan: blit rectangle needs {required:.4}, texture has {available:.4}")]
    InsufficientOverscan { required: f64, available: f64 },

    #[error("no root of the reflection quadratic lies between player and viewer")]
    NoPhysicalRoot,
}
