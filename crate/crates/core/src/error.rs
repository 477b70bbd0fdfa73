use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("DegenerateBody: {0}")]
    DegenerateBody(String),
    #[error("BarycenterNotAtOrigin: barycenter {0:?}")]
    BarycenterNotAtOrigin(Vec<f64>),
    #[error("OriginNotInterior: inradius about the origin is {0}")]
    OriginNotInterior(f64),
    #[error("ErosionEmpty: epsilon {epsilon} is not below the Chebyshev radius {radius}")]
    ErosionEmpty { epsilon: f64, radius: f64 },
    #[error("UnsupportedDimension: {0}")]
    UnsupportedDimension(usize),
    #[error("NonIntegralVertex: {0:?}")]
    NonIntegralVertex(Vec<f64>),
    #[error("DomainError: {what} at {value}")]
    DomainError { what: &'static str, value: f64 },
    #[error("DivisionByZero: ratio coupling with t = 0")]
    DivisionByZero,
    #[error("HypothesisViolated: {0}")]
    HypothesisViolated(String),
    #[error("InactiveSite: site {0} never attains the maximum")]
    InactiveSite(usize),
    #[error("PositivityLost: minimum {min} after normalization")]
    PositivityLost { min: f64 },
    #[error("Unbounded: origin is not interior to the convex hull of the sites")]
    Unbounded,
    #[error("BoundViolated: {0}")]
    BoundViolated(String),
    #[error("NoConvergence after {iterations} iterations (relative mass error {residual:e})")]
    NoConvergence { iterations: usize, residual: f64, weights: Vec<f64> },
    #[error("EmptyCellPersistent: site {0}")]
    EmptyCellPersistent(usize),
    #[error("NonPositivePotential: value {value} at {x:?}")]
    NonPositivePotential { x: Vec<f64>, value: f64 },
    #[error("WrongProfile: {0}")]
    WrongProfile(String),
    #[error("MonotonicityViolated at step {step}: gap1 {gap1:e}, gap2 {gap2:e}")]
    MonotonicityViolated { step: usize, gap1: f64, gap2: f64 },
    #[error("InequalityViolated: lhs {lhs} > rhs {rhs}")]
    InequalityViolated { lhs: f64, rhs: f64 },
    #[error("TailTooHeavy: truncated mass {tail:e} exceeds {tol:e}; enlarge the box")]
    TailTooHeavy { tail: f64, tol: f64 },
    #[error("GridMismatch")]
    GridMismatch,
    #[error("NonconvexSample at {0:?}")]
    NonconvexSample(Vec<f64>),
    #[error("PreconditionViolated: {0}")]
    PreconditionViolated(String),
    #[error("ShootingFailed: {0}")]
    ShootingFailed(String),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("Parse: {0}")]
    Parse(String),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
}
