use thiserror::Error;

use crate::grid::Level;
use crate::sparse::Space;

pub type Result<T> = std::result::Result<T, CongaError>;

#[derive(Debug, Error)]
pub enum CongaError {
    #[error("invalid grid specification: {0}")]
    InvalidGrid(String),

    #[error("active cells do not form a connected region")]
    DisconnectedMask,

    #[error("polynomial degree must be at least 1")]
    InvalidDegree,

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("invalid multi-index: {0}")]
    InvalidMultiIndex(String),

    #[error("space mismatch: left operand acts on {left:?}, right operand produces {right:?}")]
    SpaceMismatch { left: Space, right: Space },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("level mismatch: expected {expected:?}, found {found:?}")]
    LevelMismatch { expected: Level, found: Level },

    #[error("point ({x}, {y}) lies outside cell ({k1}, {k2})")]
    PointOutsideCell { x: f64, y: f64, k1: usize, k2: usize },

    #[error("penalization parameter must be nonnegative, got {0}")]
    NegativePenalty(f64),

    #[error("penalization parameter must be positive for this operation")]
    PenaltyRequired,

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("resonance: reciprocal condition estimate {rcond:.3e} below threshold")]
    Resonance { rcond: f64 },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("relative error requested for a field with vanishing norm")]
    ZeroNorm,

    #[error("incompatible field header: {0}")]
    IncompatibleField(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
