use thiserror::Error;

/// Errors surfaced by the discretisation, solver and harness layers.
#[derive(Debug, Error)]
pub enum GdmError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid discretisation: {0}")]
    InvalidDiscretisation(String),

    #[error("data evaluation produced a non-finite value at (t, x) = ({t}, {x})")]
    DataEvaluation { t: f64, x: f64 },

    /// The coupled solve for a nonzero time-boundary operator produced a
    /// singular fixed-point system. For valid data this signals a bug.
    #[error("time-boundary system singular")]
    SingularBoundarySystem,

    #[error("evaluation domain error: {0}")]
    Domain(String),

    #[error("invalid problem data: {0}")]
    InvalidData(String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("rate extraction rejected: {0}")]
    RateExtraction(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GdmError>;
