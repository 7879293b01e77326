use thiserror::Error;

/// Errors produced by the geometry, fitting and inference routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("log map undefined at cut locus")]
    CutLocus,

    #[error("projection non-unique at poles")]
    PoleProjection,

    #[error("tangent vector is based at a different point")]
    BaseMismatch,

    #[error("loss not smooth: observation {obs}, group {group} lies at a pole of the axis")]
    NonSmooth { obs: usize, group: usize },

    #[error("Hessian singular: model unidentified or degenerate data (condition number {condition:e})")]
    SingularHessian { condition: f64 },

    #[error("covariance block singular")]
    SingularCovariance,

    #[error("point outside chart domain")]
    OutsideChart,

    #[error("A1 truncation infeasible for this truth")]
    TruncationInfeasible,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
