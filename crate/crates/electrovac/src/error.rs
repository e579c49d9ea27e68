//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong while constructing or evaluating fields,
/// invariants, solution families, reductions, or verification runs.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point lies on the declared singular set of the field{}", detail(.0))]
    SingularPoint(Option<String>),

    #[error("dimension mismatch: field expects n = {expected}, point has n = {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite result in numerical stencil")]
    NonFiniteResult,

    #[error("level set {level} produced no samples in the search region")]
    EmptyLevelSet { level: f64 },

    #[error("gradient magnitude below threshold at a sampled point")]
    DegenerateGradient,

    #[error("conformal factor is not positive at the evaluated point (value {0})")]
    NonPositiveConformalFactor(f64),

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("two centers coincide (indices {0} and {1})")]
    CoincidentCenters(usize, usize),

    #[error("slope constant k must be nonzero")]
    ZeroSlope,

    #[error("discriminant 4*eta*delta - theta^2 = {0} is not positive")]
    DegenerateDiscriminant(f64),

    #[error("lower lapse bound A = {0} is not positive; uniform equivalence not certified")]
    NonPositiveLowerBound(f64),

    #[error("invariant does not admit a separable reduction: {0}")]
    NotSeparable(String),

    #[error("adaptive quadrature failed to reach tolerance {tol} on [{a}, {b}]")]
    QuadratureFailure { a: f64, b: f64, tol: f64 },

    #[error("reduced-system coefficient s(xi) = 4*tau*xi + beta vanishes near xi = {0}")]
    SingularCoefficient(f64),

    #[error("constraint residual {value} exceeded the drift bound {bound} at xi = {xi}")]
    ConstraintDrift { xi: f64, value: f64, bound: f64 },

    #[error("step size underflow in the adaptive integrator at xi = {0}")]
    StepFailure(f64),

    #[error("lapse profile is stationary (U' = 0) at xi = {0}")]
    StationaryLapse(f64),

    #[error("xi = {xi} outside the tabulated profile range [{lo}, {hi}]")]
    OutOfProfileRange { xi: f64, lo: f64, hi: f64 },

    #[error("sampling region has vanishing acceptance probability ({accepted} accepted from {drawn} candidates)")]
    EmptyRegion { drawn: u64, accepted: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn detail(d: &Option<String>) -> String {
    match d {
        Some(s) => format!(" ({s})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn singular(what: impl Into<String>) -> Self {
        Error::SingularPoint(Some(what.into()))
    }

    pub(crate) fn invalid(what: impl Into<String>) -> Self {
        Error::InvalidParameter(what.into())
    }

    pub(crate) fn domain(what: impl Into<String>) -> Self {
        Error::DomainViolation(what.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
