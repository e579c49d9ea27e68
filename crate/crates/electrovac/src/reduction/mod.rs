//! PDE-to-ODE machinery: the lapse equation along a separable invariant,
//! the quadric reduced system with constraint monitoring, adaptive
//! quadrature and integration, and the lifting of 1-D profiles back to
//! fields over R^n.

pub mod profile;
pub mod quad;
pub mod quadric;
pub mod rk45;

pub use profile::{
    lapse_composition_laplacian, lapse_ode_residual, lapse_ode_residual_forms,
    solve_lapse_from_invariant, LapseProfile, LapseTable, SolveOptions, SolvedLapse,
};
pub use quadric::{
    consistent_psi_slope, integrate_quadric_system, lift_profiles, lift_quadric_trajectory,
    mp_affine_initial, quadric_constraint, second_derivs, QuadricOdeState, QuadricParams,
    QuadricTolerances, QuadricTrajectory, StateComponent, TrajectoryCurve,
};

use crate::error::Result;
use crate::field::Curve1;
use crate::invariants::InvariantField;
use crate::residuals::SystemInstance;
use crate::solutions::mp_system_from_u;
use std::sync::Arc;

/// Lift a lapse profile U(xi) through an invariant into a full class
/// instance: N = 1/(U o xi), phi = (U o xi)^{-1/(n-2)}, psi from the
/// potential identity, Lambda = 0.
pub fn lift_mp_profile(
    profile: &LapseProfile,
    inv: &InvariantField,
    sign: i8,
) -> Result<SystemInstance> {
    let curve: Arc<dyn Curve1> = Arc::new(profile.clone());
    let u_field = inv.field().through_curve(curve);
    mp_system_from_u(inv.n(), &u_field, sign)
}
