//! Numerical verification laboratory for electrostatic Einstein-Maxwell
//! systems whose spatial metric is conformal to Euclidean space.
//!
//! The crate constructs closed-form solution families (multi-centered and
//! dilation-invariant extremal classes), reduces the field equations to
//! ODEs along symmetry invariants, and certifies pointwise that every
//! equation of the system holds to near machine precision over sampled
//! domains.
//!
//! Module map:
//! - [`jet`], [`field`]: second-order forward-mode jets and scalar-field
//!   expression trees, with a finite-difference oracle.
//! - [`invariants`]: quadric, dilation, and harmonic-pole ansatz functions
//!   with analytic jets and separability diagnostics.
//! - [`conformal`]: curvature and differential operators of g/phi^2.
//! - [`residuals`]: pointwise residuals of every defining equation, in both
//!   covariant and Cartesian form.
//! - [`solutions`]: constructors for the closed-form families and their
//!   structural identities.
//! - [`reduction`]: the lapse ODE along an invariant, the quadric reduced
//!   system, quadrature, adaptive integration, and lifting profiles back
//!   to fields.
//! - [`harness`]: seeded domain sampling, residual aggregation, reports.

pub mod conformal;
pub mod error;
pub mod field;
pub mod func1;
pub mod harness;
pub mod invariants;
pub mod jet;
pub mod reduction;
pub mod residuals;
pub mod rng;
pub mod solutions;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use jet::{Jet2, Point};

/// Numerical policy constants. All are defaults; operations that depend on
/// them accept overrides.
pub mod defaults {
    /// Declared singular sets are the sub-level sets |expr| <= EPS_SING.
    pub const EPS_SING: f64 = 1e-12;
    /// Exclusion radius around harmonic-pole centers.
    pub const EPS_CENTER: f64 = 1e-6;
    /// Gradients below this magnitude count as degenerate.
    pub const EPS_GRAD: f64 = 1e-10;
    /// Level-set spread below which an invariant is declared separable.
    pub const TOL_SEP: f64 = 1e-8;
    /// Central-difference step for gradient oracles.
    pub const FD_STEP_GRAD: f64 = 1e-5;
    /// Central-difference step for Hessian oracles.
    pub const FD_STEP_HESS: f64 = 1e-4;
    /// Relative hyperplane margin |P(x)| >= margin * (1 + |x|) for sampling.
    pub const HYPERPLANE_MARGIN: f64 = 1e-6;
}
