//! The reduced ODE system along a quadric invariant
//! xi = sum (tau x_k^2 + gamma_k x_k + theta_k), where s(xi) = 4 tau xi
//! + beta plays the role of |grad xi|^2 and sum xi_{,kk} = 2 n tau.
//!
//! Three equations evolve (phi'', psi'', N'' solve uniquely when N, phi,
//! s(xi) are nonzero); the remaining diagonal equation is first-order once
//! the evolution relations eliminate phi'', and is monitored as a
//! constraint along the flow.

use crate::error::{Error, Result};
use crate::field::Curve1;
use crate::invariants::{InvariantField, QuadricInvariant};
use crate::reduction::profile::hermite;
use crate::reduction::rk45::{AdaptiveRk, RkOptions};
use crate::residuals::SystemInstance;
use std::sync::Arc;

/// Constants of the reduced system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadricParams {
    pub n: usize,
    pub tau: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl QuadricParams {
    pub fn from_invariant(inv: &QuadricInvariant, lambda: f64) -> Self {
        QuadricParams {
            n: inv.n(),
            tau: inv.tau(),
            beta: inv.beta(),
            lambda,
        }
    }

    /// s(xi) = 4 tau xi + beta.
    pub fn s(&self, xi: f64) -> f64 {
        4.0 * self.tau * xi + self.beta
    }

    fn s_checked(&self, xi: f64) -> Result<f64> {
        let s = self.s(xi);
        if s.abs() <= 1e-12 {
            return Err(Error::SingularCoefficient(xi));
        }
        Ok(s)
    }
}

/// State of the reduced flow at one xi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadricOdeState {
    pub xi: f64,
    pub phi: f64,
    pub dphi: f64,
    pub lapse: f64,
    pub dlapse: f64,
    pub psi: f64,
    pub dpsi: f64,
}

impl QuadricOdeState {
    fn as_vec(&self) -> Vec<f64> {
        vec![
            self.phi,
            self.dphi,
            self.lapse,
            self.dlapse,
            self.psi,
            self.dpsi,
        ]
    }

    fn from_slice(xi: f64, y: &[f64]) -> Self {
        QuadricOdeState {
            xi,
            phi: y[0],
            dphi: y[1],
            lapse: y[2],
            dlapse: y[3],
            psi: y[4],
            dpsi: y[5],
        }
    }
}

/// (phi'', N'', psi'') from the three evolution equations.
pub fn second_derivs(params: &QuadricParams, xi: f64, y: &[f64]) -> Result<(f64, f64, f64)> {
    let nf = params.n as f64;
    let s = params.s_checked(xi)?;
    let (phi, dphi, lapse, dlapse, dpsi) = (y[0], y[1], y[2], y[3], y[5]);
    if lapse <= 0.0 {
        return Err(Error::domain(format!("lapse N = {lapse} is not positive")));
    }
    if phi <= 0.0 {
        return Err(Error::domain(format!(
            "conformal factor phi = {phi} is not positive"
        )));
    }
    let lapse2 = -2.0 * params.lambda * lapse / ((nf - 1.0) * s)
        - 2.0 * nf * params.tau * dlapse / s
        + (nf - 2.0) * dphi * dlapse / phi
        + 2.0 * (nf - 2.0) * dpsi * dpsi / ((nf - 1.0) * lapse);
    let psi2 =
        -2.0 * nf * params.tau * dpsi / s + (nf - 2.0) * dphi * dpsi / phi + dpsi * dlapse / lapse;
    let phi2 = (phi * lapse2 + 2.0 * dphi * dlapse - 2.0 * phi * dpsi * dpsi / lapse)
        / ((nf - 2.0) * lapse);
    Ok((phi2, lapse2, psi2))
}

/// The monitored diagonal constraint, with phi'' eliminated through the
/// evolution relations; returns (signed value, normalized value).
pub fn quadric_constraint(params: &QuadricParams, xi: f64, y: &[f64]) -> Result<(f64, f64)> {
    let nf = params.n as f64;
    let s = params.s_checked(xi)?;
    let (phi, dphi, lapse, dlapse, dpsi) = (y[0], y[1], y[2], y[3], y[5]);
    let (phi2, _, _) = second_derivs(params, xi, y)?;

    let mut sum = 0.0;
    let mut max_abs = 0.0_f64;
    let mut push = |t: f64| {
        sum += t;
        max_abs = max_abs.max(t.abs());
    };
    push(phi * phi2 * lapse * s);
    push(-(nf - 1.0) * dphi * dphi * lapse * s);
    push(phi * dphi * dlapse * s);
    push(-2.0 * phi * phi * dpsi * dpsi * s / ((nf - 1.0) * lapse));
    push(4.0 * (nf - 1.0) * params.tau * phi * dphi * lapse);
    push(-2.0 * params.tau * phi * phi * dlapse);
    push(-2.0 * params.lambda * lapse / (nf - 1.0));
    Ok((sum, sum.abs() / (1.0 + max_abs)))
}

/// Solve the constraint for a consistent psi' >= 0 at the initial point,
/// holding the rest of the state fixed. The constraint is affine in
/// (psi')^2, so this is a single division; a negative root means the
/// requested state admits no real potential slope.
pub fn consistent_psi_slope(
    params: &QuadricParams,
    xi: f64,
    phi: f64,
    dphi: f64,
    lapse: f64,
    dlapse: f64,
) -> Result<f64> {
    let probe = |w: f64| -> Result<f64> {
        let y = [phi, dphi, lapse, dlapse, 0.0, w.sqrt()];
        Ok(quadric_constraint(params, xi, &y)?.0)
    };
    let c0 = probe(0.0)?;
    let c1 = probe(1.0)?;
    let slope = c1 - c0;
    if slope.abs() <= 1e-300 {
        return Err(Error::invalid("constraint does not depend on psi'"));
    }
    let w = -c0 / slope;
    if w < 0.0 {
        return Err(Error::invalid(format!(
            "no real psi' satisfies the constraint (needs (psi')^2 = {w})"
        )));
    }
    Ok(w.sqrt())
}

#[derive(Debug, Clone)]
pub struct QuadricTolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Admissible normalized constraint violation of the initial state.
    pub constraint_tol: f64,
    /// Abort threshold for normalized constraint drift along the flow.
    pub drift_abort: f64,
    /// Knot spacing ceiling for the recorded trajectory.
    pub max_output_step: f64,
    /// Cubic-Hermite reconstruction budget between knots.
    pub interp_budget: f64,
}

impl Default for QuadricTolerances {
    fn default() -> Self {
        QuadricTolerances {
            rtol: 1e-10,
            atol: 1e-12,
            constraint_tol: 1e-10,
            drift_abort: 1e-6,
            max_output_step: 0.05,
            interp_budget: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadricKnot {
    pub xi: f64,
    pub y: [f64; 6],
    /// (phi'', N'', psi'') from the evolution equations at this knot.
    pub d2: [f64; 3],
    /// Normalized constraint residual.
    pub constraint: f64,
}

/// An integrated trajectory of the reduced system, dense enough for cubic
/// Hermite reconstruction within the interpolation budget.
#[derive(Debug, Clone)]
pub struct QuadricTrajectory {
    pub params: QuadricParams,
    pub knots: Vec<QuadricKnot>,
}

fn make_knot(params: &QuadricParams, xi: f64, y: &[f64]) -> Result<QuadricKnot> {
    let (p2, l2, q2) = second_derivs(params, xi, y)?;
    let (_, cnorm) = quadric_constraint(params, xi, y)?;
    Ok(QuadricKnot {
        xi,
        y: [y[0], y[1], y[2], y[3], y[4], y[5]],
        d2: [p2, l2, q2],
        constraint: cnorm,
    })
}

/// Integrate the reduced system from `initial` to `xi_end`, monitoring the
/// constraint and refining the recorded grid until Hermite reconstruction
/// meets the interpolation budget.
pub fn integrate_quadric_system(
    params: &QuadricParams,
    initial: &QuadricOdeState,
    xi_end: f64,
    tols: &QuadricTolerances,
) -> Result<QuadricTrajectory> {
    let xi0 = initial.xi;
    if xi_end == xi0 {
        return Err(Error::invalid("empty integration interval"));
    }
    // s(xi) must keep one sign over the whole interval.
    params.s_checked(xi0)?;
    params.s_checked(xi_end)?;
    if params.tau != 0.0 {
        let root = -params.beta / (4.0 * params.tau);
        if (root - xi0) * (root - xi_end) < 0.0 {
            return Err(Error::SingularCoefficient(root));
        }
    }

    let y0 = initial.as_vec();
    let (_, c0) = quadric_constraint(params, xi0, &y0)?;
    if c0 > tols.constraint_tol {
        return Err(Error::ConstraintDrift {
            xi: xi0,
            value: c0,
            bound: tols.constraint_tol,
        });
    }

    let rhs = move |x: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let (p2, l2, q2) = second_derivs(params, x, y)?;
        dy[0] = y[1];
        dy[1] = p2;
        dy[2] = y[3];
        dy[3] = l2;
        dy[4] = y[5];
        dy[5] = q2;
        Ok(())
    };
    let step_cap = move |x: f64| -> f64 {
        if params.tau == 0.0 {
            f64::INFINITY
        } else {
            // Never step more than halfway to the s = 0 singularity.
            0.5 * (params.s(x) / (4.0 * params.tau)).abs()
        }
    };

    let opts = RkOptions {
        rtol: tols.rtol,
        atol: tols.atol,
        ..RkOptions::default()
    };
    let mut stepper = AdaptiveRk::new(&rhs, xi0, y0.clone(), opts.clone()).with_step_cap(&step_cap);

    let span = (xi_end - xi0).abs();
    let segments = (span / tols.max_output_step).ceil().max(1.0) as usize;
    let mut knots = Vec::with_capacity(segments + 1);
    knots.push(make_knot(params, xi0, &y0)?);
    for seg in 1..=segments {
        let target = xi0 + (xi_end - xi0) * (seg as f64 / segments as f64);
        stepper.advance_to(target)?;
        let knot = make_knot(params, stepper.x, &stepper.y)?;
        if knot.constraint > tols.drift_abort {
            return Err(Error::ConstraintDrift {
                xi: stepper.x,
                value: knot.constraint,
                bound: tols.drift_abort,
            });
        }
        knots.push(knot);
    }

    // Refine intervals whose Hermite reconstruction misses the budget.
    let mut refined = knots;
    for _round in 0..6 {
        let mut next: Vec<QuadricKnot> = Vec::with_capacity(refined.len() * 2);
        let mut any_split = false;
        for w in 0..refined.len() - 1 {
            let (a, b) = (&refined[w], &refined[w + 1]);
            next.push(a.clone());
            if (b.xi - a.xi).abs() < 1e-6 {
                continue;
            }
            let mid = 0.5 * (a.xi + b.xi);
            let mut probe =
                AdaptiveRk::new(&rhs, a.xi, a.y.to_vec(), opts.clone()).with_step_cap(&step_cap);
            probe.advance_to(mid)?;
            let exact = probe.y.clone();
            let mut worst = 0.0_f64;
            for (comp, slot) in [(0usize, 0usize), (2, 1), (4, 2)] {
                let pred = hermite(
                    mid,
                    a.xi,
                    b.xi,
                    a.y[comp],
                    a.y[comp + 1],
                    b.y[comp],
                    b.y[comp + 1],
                );
                let dpred = hermite(
                    mid,
                    a.xi,
                    b.xi,
                    a.y[comp + 1],
                    a.d2[slot],
                    b.y[comp + 1],
                    b.d2[slot],
                );
                worst = worst
                    .max((pred - exact[comp]).abs() / (1.0 + exact[comp].abs()))
                    .max((dpred - exact[comp + 1]).abs() / (1.0 + exact[comp + 1].abs()));
            }
            if worst > 0.5 * tols.interp_budget {
                next.push(make_knot(params, mid, &exact)?);
                any_split = true;
            }
        }
        next.push(refined.last().unwrap().clone());
        refined = next;
        if !any_split {
            break;
        }
    }

    // Keep knot order ascending in xi for interpolation lookups.
    if refined.first().unwrap().xi > refined.last().unwrap().xi {
        refined.reverse();
    }
    Ok(QuadricTrajectory {
        params: *params,
        knots: refined,
    })
}

impl QuadricTrajectory {
    pub fn xi_range(&self) -> (f64, f64) {
        (self.knots[0].xi, self.knots.last().unwrap().xi)
    }

    pub fn max_constraint(&self) -> f64 {
        self.knots.iter().fold(0.0_f64, |m, k| m.max(k.constraint))
    }

    pub fn final_state(&self) -> QuadricOdeState {
        let k = self.knots.last().unwrap();
        QuadricOdeState::from_slice(k.xi, &k.y)
    }

    fn locate(&self, xi: f64) -> Result<usize> {
        let (lo, hi) = self.xi_range();
        if xi < lo || xi > hi {
            return Err(Error::OutOfProfileRange { xi, lo, hi });
        }
        let mut idx = match self
            .knots
            .binary_search_by(|k| k.xi.partial_cmp(&xi).expect("finite grid"))
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        idx = idx.min(self.knots.len() - 2);
        Ok(idx)
    }

    /// Interpolated state with ODE-consistent second derivatives.
    pub fn eval_state(&self, xi: f64) -> Result<[(f64, f64, f64); 3]> {
        let i = self.locate(xi)?;
        let (a, b) = (&self.knots[i], &self.knots[i + 1]);
        let mut y = [0.0; 6];
        for (comp, slot) in [(0usize, 0usize), (2, 1), (4, 2)] {
            y[comp] = hermite(
                xi,
                a.xi,
                b.xi,
                a.y[comp],
                a.y[comp + 1],
                b.y[comp],
                b.y[comp + 1],
            );
            y[comp + 1] = hermite(
                xi,
                a.xi,
                b.xi,
                a.y[comp + 1],
                a.d2[slot],
                b.y[comp + 1],
                b.d2[slot],
            );
        }
        let (p2, l2, q2) = second_derivs(&self.params, xi, &y)?;
        Ok([(y[0], y[1], p2), (y[2], y[3], l2), (y[4], y[5], q2)])
    }

    /// CSV export: xi, phi, phi', N, N', psi, psi', constraint residual.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("xi,phi,dphi,N,dN,psi,dpsi,constraint_residual\n");
        for k in &self.knots {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                k.xi, k.y[0], k.y[1], k.y[2], k.y[3], k.y[4], k.y[5], k.constraint
            ));
        }
        out
    }
}

/// One component of a trajectory as a 1-D curve.
#[derive(Debug, Clone, Copy)]
pub enum StateComponent {
    Phi,
    Lapse,
    Psi,
}

#[derive(Debug)]
pub struct TrajectoryCurve {
    traj: Arc<QuadricTrajectory>,
    comp: StateComponent,
}

impl Curve1 for TrajectoryCurve {
    fn eval2(&self, t: f64) -> Result<(f64, f64, f64)> {
        let state = self.traj.eval_state(t)?;
        Ok(match self.comp {
            StateComponent::Phi => state[0],
            StateComponent::Lapse => state[1],
            StateComponent::Psi => state[2],
        })
    }
}

/// Lift an integrated trajectory back to fields over R^n by composing each
/// profile with the quadric invariant.
pub fn lift_quadric_trajectory(
    traj: Arc<QuadricTrajectory>,
    inv: &Arc<QuadricInvariant>,
) -> Result<SystemInstance> {
    if inv.n() != traj.params.n || inv.tau() != traj.params.tau || inv.beta() != traj.params.beta {
        return Err(Error::invalid(
            "trajectory parameters do not match the invariant",
        ));
    }
    if !inv.has_identity_outer() {
        return Err(Error::invalid(
            "lifting expects the identity outer reparametrization",
        ));
    }
    let xi = InvariantField::Quadric(inv.clone()).field();
    let mk = |comp: StateComponent| -> Arc<dyn Curve1> {
        Arc::new(TrajectoryCurve {
            traj: traj.clone(),
            comp,
        })
    };
    Ok(SystemInstance::new(
        traj.params.n,
        xi.through_curve(mk(StateComponent::Phi)),
        xi.through_curve(mk(StateComponent::Lapse)),
        xi.through_curve(mk(StateComponent::Psi)),
        traj.params.lambda,
    ))
}

/// Lift arbitrary 1-D profiles for (phi, N, psi) through an invariant.
pub fn lift_profiles(
    phi: Arc<dyn Curve1>,
    lapse: Arc<dyn Curve1>,
    psi: Arc<dyn Curve1>,
    inv: &InvariantField,
    lambda: f64,
) -> SystemInstance {
    let xi = inv.field();
    SystemInstance::new(
        inv.n(),
        xi.through_curve(phi),
        xi.through_curve(lapse),
        xi.through_curve(psi),
        lambda,
    )
}

/// Reduced-system state carrying the class structure
/// phi = N^{1/(n-2)}, (psi')^2 = (n-1)/(2(n-2)) (N')^2 for an affine
/// U = a xi + c (with U > 0 at xi0 and a != 0).
pub fn mp_affine_initial(n: usize, xi0: f64, a: f64, c: f64) -> Result<QuadricOdeState> {
    if a == 0.0 {
        return Err(Error::ZeroSlope);
    }
    let nf = n as f64;
    let u = a * xi0 + c;
    if u <= 0.0 {
        return Err(Error::domain(format!("U(xi0) = {u} is not positive")));
    }
    let lapse = 1.0 / u;
    let dlapse = -a / (u * u);
    let phi = lapse.powf(1.0 / (nf - 2.0));
    let dphi = phi / (nf - 2.0) * dlapse / lapse;
    let coeff = ((nf - 1.0) / (2.0 * (nf - 2.0))).sqrt();
    let psi = coeff * (1.0 - lapse);
    let dpsi = -coeff * dlapse;
    Ok(QuadricOdeState {
        xi: xi0,
        phi,
        dphi,
        lapse,
        dlapse,
        psi,
        dpsi,
    })
}
