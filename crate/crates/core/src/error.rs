use thiserror::Error;

/// Errors raised by the geometry, calibration, verification and lattice code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid cone parameters: {0}")]
    InvalidParams(String),

    #[error("point is at the origin")]
    Origin,

    #[error("point lies on the 2-plane x' = 0 where the field is undefined")]
    OnAxisPlane,

    #[error("point lies outside the closed cone")]
    OutsideCone,

    #[error("point is not on the lateral cone surface")]
    NotOnSurface,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),

    #[error("degree overflow: {left} + {right} exceeds dimension {n}")]
    DegreeOverflow { left: usize, right: usize, n: usize },

    #[error("finite-difference step {step} too large: stencil needs 2*step < {clearance}")]
    StepTooLarge { step: f64, clearance: f64 },

    #[error("no positive profile exponent: (n-1)/(2(1+lambda^2)) = {0} <= 1")]
    NoPositiveGamma(f64),

    #[error("profile exponent must be positive, got {0}")]
    NonPositiveGamma(f64),

    #[error("empty feasible slope range for n = {0}")]
    EmptyFeasibleRange(usize),

    #[error("dimension n = {0} is below the supported minimum {1}")]
    DimensionTooSmall(usize, usize),

    #[error("angle {0} outside (-pi/2, pi/2)")]
    AngleOutOfRange(f64),

    #[error("argument {0} below 1")]
    BelowOne(f64),

    #[error("invalid flux region: {0}")]
    InvalidRegion(String),

    #[error("lattice: {0}")]
    Lattice(String),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
