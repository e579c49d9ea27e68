//! Lapse profiles U(xi) = 1/N(xi): closed-form and tabulated, the lapse
//! ODE residual along an invariant, and the first-integral solver
//! U' = k exp(-int h) for separable invariants.

use crate::defaults::{EPS_GRAD, EPS_SING};
use crate::error::{Error, Result};
use crate::field::Curve1;
use crate::func1::Func1;
use crate::invariants::{InvariantField, SeparableH};
use crate::jet::Point;
use crate::reduction::quad;
use std::sync::Arc;

/// U over a xi-grid with derivatives at the knots. Values interpolate by
/// cubic Hermite from (U, U'); first derivatives by cubic Hermite from
/// (U', U''); second derivatives come from the ODE U'' = -h(xi) U' rather
/// than from differentiating the interpolant twice.
#[derive(Debug, Clone)]
pub struct LapseTable {
    xi: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
    d2u: Vec<f64>,
    h: SeparableH,
}

impl LapseTable {
    pub fn xi_range(&self) -> (f64, f64) {
        (self.xi[0], *self.xi.last().unwrap())
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.xi.len()).map(move |i| (self.xi[i], self.u[i], self.du[i]))
    }

    fn locate(&self, t: f64) -> Result<usize> {
        let (lo, hi) = self.xi_range();
        if t < lo || t > hi {
            return Err(Error::OutOfProfileRange { xi: t, lo, hi });
        }
        let idx = match self
            .xi
            .binary_search_by(|x| x.partial_cmp(&t).expect("finite grid"))
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        Ok(idx.min(self.xi.len() - 2))
    }

    pub fn eval2(&self, t: f64) -> Result<(f64, f64, f64)> {
        let i = self.locate(t)?;
        let (x0, x1) = (self.xi[i], self.xi[i + 1]);
        let u = hermite(
            t,
            x0,
            x1,
            self.u[i],
            self.du[i],
            self.u[i + 1],
            self.du[i + 1],
        );
        let du = hermite(
            t,
            x0,
            x1,
            self.du[i],
            self.d2u[i],
            self.du[i + 1],
            self.d2u[i + 1],
        );
        let d2u = -self.h.h(t)? * du;
        Ok((u, du, d2u))
    }
}

/// Cubic Hermite interpolation of (f, f') data on [x0, x1].
pub(crate) fn hermite(t: f64, x0: f64, x1: f64, f0: f64, m0: f64, f1: f64, m1: f64) -> f64 {
    let h = x1 - x0;
    let s = (t - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    f0 * (2.0 * s3 - 3.0 * s2 + 1.0)
        + m0 * h * (s3 - 2.0 * s2 + s)
        + f1 * (-2.0 * s3 + 3.0 * s2)
        + m1 * h * (s3 - s2)
}

/// A lapse inverse U(xi), closed-form or tabulated.
#[derive(Debug, Clone)]
pub enum LapseProfile {
    Closed(Func1),
    Table(Arc<LapseTable>),
}

impl LapseProfile {
    pub fn eval2(&self, t: f64) -> Result<(f64, f64, f64)> {
        match self {
            LapseProfile::Closed(f) => f.eval(t),
            LapseProfile::Table(tab) => tab.eval2(t),
        }
    }
}

impl Curve1 for LapseProfile {
    fn eval2(&self, t: f64) -> Result<(f64, f64, f64)> {
        LapseProfile::eval2(self, t)
    }
}

/// Both algebraic forms of the lapse ODE residual at `p`:
/// the ratio form |U''/U' + Delta xi / |grad xi|^2| and the equivalent
/// |Delta_g(U o xi)| / (|U'| |grad xi|^2). They agree up to rounding; both
/// are returned so the agreement itself can be checked.
pub fn lapse_ode_residual_forms(
    profile: &LapseProfile,
    inv: &InvariantField,
    p: &Point,
) -> Result<(f64, f64)> {
    let jet = inv.xi_jet(p)?;
    let gnorm2 = jet.grad_norm_sq();
    if gnorm2 <= EPS_GRAD * EPS_GRAD {
        return Err(Error::DegenerateGradient);
    }
    let (_, du, d2u) = profile.eval2(jet.value)?;
    if du.abs() <= EPS_SING {
        return Err(Error::StationaryLapse(jet.value));
    }
    let ratio_form = (d2u / du + jet.laplacian() / gnorm2).abs();
    let laplacian_form = (d2u * gnorm2 + du * jet.laplacian()).abs() / (du.abs() * gnorm2);
    Ok((ratio_form, laplacian_form))
}

/// |U''/U' + Delta xi / |grad xi|^2| at `p`; zero exactly when U o xi is
/// flat-harmonic, i.e. when the profile solves the lapse ODE along xi.
pub fn lapse_ode_residual(profile: &LapseProfile, inv: &InvariantField, p: &Point) -> Result<f64> {
    Ok(lapse_ode_residual_forms(profile, inv, p)?.0)
}

/// |Delta_g(U o xi)| at `p`, assembled from the profile and invariant jets.
pub fn lapse_composition_laplacian(
    profile: &LapseProfile,
    inv: &InvariantField,
    p: &Point,
) -> Result<f64> {
    let jet = inv.xi_jet(p)?;
    let (_, du, d2u) = profile.eval2(jet.value)?;
    Ok((d2u * jet.grad_norm_sq() + du * jet.laplacian()).abs())
}

/// Output of [`solve_lapse_from_invariant`].
#[derive(Debug, Clone)]
pub struct SolvedLapse {
    pub profile: LapseProfile,
    /// Closed form when the invariant admits one (dilation: rational
    /// arctangent; harmonic: affine).
    pub closed_form: Option<Func1>,
    /// Largest |table - closed form| over the knots, when both exist.
    pub closed_form_deviation: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub knots: usize,
    /// Per-panel absolute quadrature tolerance.
    pub quad_tol: f64,
    /// Agreement required between the table and a closed form.
    pub agreement_tol: f64,
    /// Cubic-Hermite reconstruction budget between knots; intervals are
    /// subdivided until midpoint predictions meet it.
    pub interp_budget: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            knots: 129,
            quad_tol: 1e-13,
            agreement_tol: 1e-10,
            interp_budget: 1e-10,
        }
    }
}

/// Integrate the first-order lapse ODE U'' = -h(xi) U' for a separable
/// invariant: U'(xi) = k exp(-H(xi)) with H the running integral of h
/// (normalized by the closed-form antiderivative at the interval start),
/// then U(xi) = k1 + k int_anchor^xi exp(-H).
///
/// For the dilation family the exponential collapses to k/Q(xi) and the
/// tabulated profile is checked against the rational-arctangent closed
/// form; disagreement beyond the tolerance reports as a quadrature
/// failure.
pub fn solve_lapse_from_invariant(
    inv: &InvariantField,
    k: f64,
    k1: f64,
    interval: (f64, f64),
    opts: &SolveOptions,
) -> Result<SolvedLapse> {
    if k == 0.0 {
        return Err(Error::ZeroSlope);
    }
    let (lo, hi) = interval;
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return Err(Error::invalid(format!("empty xi interval [{lo}, {hi}]")));
    }
    let h = inv
        .separable_h()
        .ok_or_else(|| Error::NotSeparable("no closed separable form for this invariant".into()))?;
    let knots = opts.knots.max(9);

    // Exact continuation of the running antiderivative H and of U from a
    // known knot: the generic first-integral path U' = k exp(-H), with H
    // accumulated by quadrature of h. H is anchored to the closed-form
    // antiderivative at the interval start so exp(-H) carries the same
    // k-convention as the closed forms.
    #[derive(Clone, Copy)]
    struct RawKnot {
        xi: f64,
        big_h: f64,
        u: f64,
    }
    let h_at = |from: RawKnot, t: f64| -> Result<f64> {
        Ok(from.big_h + quad::integrate(|s| h.h(s), from.xi, t, opts.quad_tol)?)
    };
    let u_at = |from: RawKnot, t: f64| -> Result<f64> {
        Ok(from.u
            + quad::integrate(
                |tt| {
                    let dh = quad::integrate(|s| h.h(s), from.xi, tt, opts.quad_tol)?;
                    Ok(k * (-(from.big_h + dh)).exp())
                },
                from.xi,
                t,
                opts.quad_tol,
            )?)
    };
    let du_of = |kn: RawKnot| k * (-kn.big_h).exp();
    let d2u_of = |kn: RawKnot| -> Result<f64> { Ok(-h.h(kn.xi)? * du_of(kn)) };

    // The segment between the canonical anchor and the interval start
    // fixes the integration constant; there the closed-form antiderivative
    // is integrated directly.
    let anchor = h.default_anchor().unwrap_or(lo);
    let u0 = k1
        + k * quad::integrate(
            |t| Ok((-h.antiderivative(t)?).exp()),
            anchor,
            lo,
            opts.quad_tol,
        )?;
    let mut table_knots = Vec::with_capacity(knots);
    table_knots.push(RawKnot {
        xi: lo,
        big_h: h.antiderivative(lo)?,
        u: u0,
    });
    let step = (hi - lo) / (knots - 1) as f64;
    for j in 1..knots {
        let t = if j == knots - 1 {
            hi
        } else {
            lo + step * j as f64
        };
        let prev = *table_knots.last().unwrap();
        table_knots.push(RawKnot {
            xi: t,
            big_h: h_at(prev, t)?,
            u: u_at(prev, t)?,
        });
    }

    // Subdivide intervals until cubic Hermite reconstruction from the
    // knots meets the interpolation budget at midpoints.
    for _round in 0..10 {
        let mut refined = Vec::with_capacity(table_knots.len() * 2);
        let mut any_split = false;
        for w in 0..table_knots.len() - 1 {
            let (a, b) = (table_knots[w], table_knots[w + 1]);
            refined.push(a);
            if b.xi - a.xi < 1e-6 {
                continue;
            }
            let mid_xi = 0.5 * (a.xi + b.xi);
            let mid = RawKnot {
                xi: mid_xi,
                big_h: h_at(a, mid_xi)?,
                u: u_at(a, mid_xi)?,
            };
            let u_pred = hermite(mid_xi, a.xi, b.xi, a.u, du_of(a), b.u, du_of(b));
            let du_pred = hermite(
                mid_xi,
                a.xi,
                b.xi,
                du_of(a),
                d2u_of(a)?,
                du_of(b),
                d2u_of(b)?,
            );
            if (u_pred - mid.u).abs() > 0.5 * opts.interp_budget * (1.0 + mid.u.abs())
                || (du_pred - du_of(mid)).abs()
                    > 0.5 * opts.interp_budget * (1.0 + du_of(mid).abs())
            {
                refined.push(mid);
                any_split = true;
            }
        }
        refined.push(*table_knots.last().unwrap());
        table_knots = refined;
        if !any_split {
            break;
        }
    }

    let grid: Vec<f64> = table_knots.iter().map(|kn| kn.xi).collect();
    let u: Vec<f64> = table_knots.iter().map(|kn| kn.u).collect();
    let du: Vec<f64> = table_knots.iter().map(|kn| du_of(*kn)).collect();
    let d2u: Vec<f64> = table_knots
        .iter()
        .map(|kn| d2u_of(*kn))
        .collect::<Result<_>>()?;
    let table = Arc::new(LapseTable {
        xi: grid.clone(),
        u,
        du,
        d2u,
        h,
    });

    // Closed forms for comparison.
    let closed_form = match h {
        SeparableH::DilationRational { eta, theta, delta } => Some(Func1::ArctanLapse {
            k,
            k1,
            eta,
            theta,
            delta,
        }),
        SeparableH::Zero => Some(Func1::Affine { a: k, b: k1 }),
        SeparableH::QuadricRational { .. } => None,
    };
    let mut deviation = None;
    if let Some(cf) = &closed_form {
        // Check at knots and between them.
        let mut worst = 0.0_f64;
        for w in 0..grid.len() {
            for t in [grid[w], 0.5 * (grid[w] + grid[w.min(grid.len() - 2) + 1])] {
                let (ut, _, _) = table.eval2(t)?;
                let (uc, _, _) = cf.eval(t)?;
                worst = worst.max((ut - uc).abs());
            }
        }
        if worst > opts.agreement_tol {
            return Err(Error::QuadratureFailure {
                a: lo,
                b: hi,
                tol: opts.agreement_tol,
            });
        }
        deviation = Some(worst);
    }

    Ok(SolvedLapse {
        profile: LapseProfile::Table(table),
        closed_form,
        closed_form_deviation: deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariants::{DilationInvariant, HarmonicPoleInvariant, QuadricInvariant};
    use std::sync::Arc as StdArc;

    fn point(coords: &[f64]) -> Point {
        Point::new(coords.to_vec()).unwrap()
    }

    fn dilation_inv() -> InvariantField {
        InvariantField::Dilation(StdArc::new(
            DilationInvariant::new(3, vec![1.0], vec![1.0, 1.0]).unwrap(),
        ))
    }

    #[test]
    fn affine_profile_on_harmonic_invariant_is_exact() {
        // Multi-center-style family: xi harmonic, U affine, both residual
        // forms identically zero.
        let inv = InvariantField::Pole(StdArc::new(
            HarmonicPoleInvariant::new(vec![vec![0.0; 3]], vec![1.0]).unwrap(),
        ));
        let profile = LapseProfile::Closed(Func1::Affine { a: -1.0, b: 1.0 });
        let (r1, r2) = lapse_ode_residual_forms(&profile, &inv, &point(&[1.0, 0.5, -0.2])).unwrap();
        assert!(r1 < 1e-13 && r2 < 1e-13);
    }

    #[test]
    fn dilation_closed_form_satisfies_ode() {
        let inv = dilation_inv();
        let profile = LapseProfile::Closed(Func1::ArctanLapse {
            k: 1.0,
            k1: 0.0,
            eta: 2.0,
            theta: -2.0,
            delta: 1.0,
        });
        let (r1, r2) = lapse_ode_residual_forms(&profile, &inv, &point(&[1.0, 0.0, 0.0])).unwrap();
        assert!(r1 <= 1e-10, "ratio form {r1}");
        assert!((r1 - r2).abs() <= 1e-10 * (1.0 + r1));
    }

    #[test]
    fn corrupted_square_profile_is_flagged() {
        // U = xi^2 on the dilation invariant at xi = 1:
        // U''/U' = 1, Delta xi/|grad xi|^2 = 2, residual = 3.
        let inv = dilation_inv();
        let profile = LapseProfile::Closed(Func1::Poly {
            coeffs: vec![0.0, 0.0, 1.0],
        });
        let r = lapse_ode_residual(&profile, &inv, &point(&[2.0, 0.0, 0.0])).unwrap();
        assert!((r - 3.0).abs() < 1e-12, "residual {r}");
    }

    #[test]
    fn stationary_profile_is_an_error() {
        let inv = dilation_inv();
        let profile = LapseProfile::Closed(Func1::Poly {
            coeffs: vec![0.0, 0.0, 1.0],
        });
        // xi = 0 at points with M = 0 => U' = 2 xi = 0.
        assert!(matches!(
            lapse_ode_residual(&profile, &inv, &point(&[0.0, 1.0, 0.0])),
            Err(Error::StationaryLapse(_))
        ));
    }

    #[test]
    fn solve_dilation_matches_closed_form() {
        let inv = dilation_inv();
        let solved =
            solve_lapse_from_invariant(&inv, 1.0, 0.0, (-1.5, 2.0), &SolveOptions::default())
                .unwrap();
        let dev = solved.closed_form_deviation.unwrap();
        assert!(dev <= 1e-10, "deviation {dev}");
        // The worked value: int_0^1 dxi/(2 xi^2 - 2 xi + 1) = pi/2, i.e.
        // U(1) - U(0) = pi/2 for k = 1.
        let (u1, _, _) = solved.profile.eval2(1.0).unwrap();
        let (u0, _, _) = solved.profile.eval2(0.0).unwrap();
        assert!((u1 - u0 - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn solve_pole_gives_affine() {
        let inv = InvariantField::Pole(StdArc::new(
            HarmonicPoleInvariant::new(vec![vec![0.0; 3]], vec![1.0]).unwrap(),
        ));
        let solved =
            solve_lapse_from_invariant(&inv, 2.0, -1.0, (-3.0, -0.5), &SolveOptions::default())
                .unwrap();
        assert_eq!(solved.closed_form, Some(Func1::Affine { a: 2.0, b: -1.0 }));
        let (u, du, d2u) = solved.profile.eval2(-1.0).unwrap();
        assert!((u - (-3.0)).abs() < 1e-11);
        assert!((du - 2.0).abs() < 1e-11);
        assert!(d2u.abs() < 1e-11);
    }

    #[test]
    fn solve_quadric_rotational_profile_is_harmonic() {
        // xi = |x|^2 in n = 3: U' = k s^{-3/2}, s = 4 xi; the lifted
        // composition U(xi(x)) must be flat-harmonic.
        let inv = InvariantField::Quadric(StdArc::new(
            QuadricInvariant::new(1.0, vec![0.0; 3], vec![0.0; 3], None).unwrap(),
        ));
        let solved =
            solve_lapse_from_invariant(&inv, 1.0, 2.0, (0.5, 5.0), &SolveOptions::default())
                .unwrap();
        assert!(solved.closed_form.is_none());
        for coords in [[1.0, 0.3, -0.2], [0.9, 0.9, 0.9], [1.5, 0.0, 0.5]] {
            let r = lapse_ode_residual(&solved.profile, &inv, &point(&coords)).unwrap();
            assert!(r <= 1e-9, "ode residual {r}");
        }
    }

    #[test]
    fn solve_rejects_zero_slope() {
        let inv = dilation_inv();
        assert!(matches!(
            solve_lapse_from_invariant(&inv, 0.0, 1.0, (0.0, 1.0), &SolveOptions::default()),
            Err(Error::ZeroSlope)
        ));
    }

    #[test]
    fn table_range_is_enforced() {
        let inv = dilation_inv();
        let solved =
            solve_lapse_from_invariant(&inv, 1.0, 0.0, (0.0, 1.0), &SolveOptions::default())
                .unwrap();
        assert!(matches!(
            solved.profile.eval2(1.5),
            Err(Error::OutOfProfileRange { .. })
        ));
    }
}
