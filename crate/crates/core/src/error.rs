use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("logarithm requested within {guard:e} of the antipode -1")]
    AntipodalLog { guard: f64 },
    #[error("bad lattice dimensions: {0}")]
    BadDims(String),
    #[error("field value violates its kind: {0}")]
    KindViolation(String),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("form degree error: {0}")]
    Degree(String),
    #[error("operation not available on this domain: {0}")]
    Domain(String),
    #[error("form is not closed (scaled residual {residual:e})")]
    NotClosed { residual: f64 },
    #[error("u^-1 i u differs from phi by {residual:e}")]
    LiftMismatch { residual: f64 },
    #[error("global lift obstructed by nonzero class, normalized periods {periods:?}")]
    HarmonicObstruction { periods: [f64; 3] },
    #[error("angle unwrap inconsistent, cycle defect {defect}")]
    UnwrapInconsistent { defect: f64 },
    #[error("integrality failure, gap {gap}")]
    IntegralityFailure { gap: f64 },
    #[error("primary classes differ: {0}")]
    ClassMismatch(String),
    #[error("gluing residual {residual} exceeds limit")]
    GlueFailure { residual: f64 },
    #[error("backtracking exhausted at step {step}")]
    StepFailure { step: usize },
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
