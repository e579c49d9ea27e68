//! Scalar fields on R^n as evaluatable expression trees.
//!
//! A [`ScalarField`] is a description: constants, coordinate projections,
//! linear forms, arithmetic combinations, 1-D compositions, closed-form
//! invariant families, and tabulated 1-D profile curves. Evaluation at a
//! point produces a full second-order jet by forward propagation, so a
//! single pass yields everything the curvature formulas need.
//!
//! Evaluation is pure: the same point always produces a bitwise-identical
//! jet. Nodes that can blow up (quotients, logs, roots, real powers) refuse
//! evaluation on their declared singular set instead of returning garbage.

use crate::defaults::{EPS_SING, FD_STEP_GRAD, FD_STEP_HESS};
use crate::error::{Error, Result};
use crate::func1::Func1;
use crate::invariants::InvariantField;
use crate::jet::{Jet2, Point};
use std::fmt;
use std::sync::Arc;

/// A 1-D curve evaluatable to second order; the hook through which lapse
/// profiles and integrated trajectories become fields.
pub trait Curve1: Send + Sync + fmt::Debug {
    /// Value and first two derivatives at `t`.
    fn eval2(&self, t: f64) -> Result<(f64, f64, f64)>;
}

impl Curve1 for Func1 {
    fn eval2(&self, t: f64) -> Result<(f64, f64, f64)> {
        self.eval(t)
    }
}

#[derive(Debug, Clone)]
enum Expr {
    Const(f64),
    Coord(usize),
    /// coeffs . x + offset
    Linear {
        coeffs: Vec<f64>,
        offset: f64,
    },
    Add(ScalarField, ScalarField),
    Sub(ScalarField, ScalarField),
    Mul(ScalarField, ScalarField),
    Div(ScalarField, ScalarField),
    Scale(f64, ScalarField),
    Powi(ScalarField, i32),
    Compose(Func1, ScalarField),
    Curve(Arc<dyn Curve1>, ScalarField),
    Xi(InvariantField),
}

/// An immutable, cheaply clonable scalar field.
#[derive(Debug, Clone)]
pub struct ScalarField(Arc<Expr>);

impl ScalarField {
    fn new(expr: Expr) -> Self {
        ScalarField(Arc::new(expr))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Expr::Const(c))
    }

    /// The projection x -> x_i (zero-based axis index).
    pub fn coordinate(i: usize) -> Self {
        Self::new(Expr::Coord(i))
    }

    /// The linear form coeffs . x + offset.
    pub fn linear(coeffs: Vec<f64>, offset: f64) -> Self {
        Self::new(Expr::Linear { coeffs, offset })
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::new(Expr::Scale(a, self.clone()))
    }

    pub fn powi(&self, m: i32) -> Self {
        Self::new(Expr::Powi(self.clone(), m))
    }

    /// t^r for real r; singular where the base is non-positive.
    pub fn powf(&self, r: f64) -> Self {
        self.compose(Func1::Power { exponent: r })
    }

    pub fn recip(&self) -> Self {
        self.compose(Func1::Recip)
    }

    pub fn exp(&self) -> Self {
        self.compose(Func1::Exp)
    }

    pub fn log(&self) -> Self {
        self.compose(Func1::Log)
    }

    pub fn sqrt(&self) -> Self {
        self.compose(Func1::Sqrt)
    }

    pub fn atan(&self) -> Self {
        self.compose(Func1::Atan)
    }

    pub fn compose(&self, f: Func1) -> Self {
        Self::new(Expr::Compose(f, self.clone()))
    }

    /// Compose a 1-D profile curve with this field as inner argument.
    pub fn through_curve(&self, curve: Arc<dyn Curve1>) -> Self {
        Self::new(Expr::Curve(curve, self.clone()))
    }

    /// A closed-form invariant family with analytic jets.
    pub fn from_invariant(inv: InvariantField) -> Self {
        Self::new(Expr::Xi(inv))
    }

    /// Full second-order jet at `p`.
    pub fn eval_jet(&self, p: &Point) -> Result<Jet2> {
        let n = p.n();
        match &*self.0 {
            Expr::Const(c) => Ok(Jet2::constant(*c, n)),
            Expr::Coord(i) => {
                if *i >= n {
                    return Err(Error::DimensionMismatch {
                        expected: i + 1,
                        got: n,
                    });
                }
                Ok(Jet2::coordinate(p[*i], *i, n))
            }
            Expr::Linear { coeffs, offset } => {
                if coeffs.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: coeffs.len(),
                        got: n,
                    });
                }
                let value = coeffs
                    .iter()
                    .zip(p.coords())
                    .fold(*offset, |acc, (c, x)| acc + c * x);
                Ok(Jet2::from_parts(value, coeffs.clone(), vec![0.0; n * n]))
            }
            Expr::Add(a, b) => Ok(a.eval_jet(p)?.add(&b.eval_jet(p)?)),
            Expr::Sub(a, b) => Ok(a.eval_jet(p)?.sub(&b.eval_jet(p)?)),
            Expr::Mul(a, b) => Ok(a.eval_jet(p)?.mul(&b.eval_jet(p)?)),
            Expr::Div(a, b) => {
                let den = b.eval_jet(p)?;
                if den.value.abs() <= EPS_SING {
                    return Err(Error::singular(format!(
                        "quotient denominator = {}",
                        den.value
                    )));
                }
                Ok(a.eval_jet(p)?.div(&den))
            }
            Expr::Scale(a, f) => Ok(f.eval_jet(p)?.scale(*a)),
            Expr::Powi(f, m) => {
                let base = f.eval_jet(p)?;
                if *m < 0 && base.value.abs() <= EPS_SING {
                    return Err(Error::singular(format!(
                        "negative power of near-zero base {}",
                        base.value
                    )));
                }
                Ok(base.powi(*m))
            }
            Expr::Compose(f, inner) => {
                let jet = inner.eval_jet(p)?;
                let (v, dv, d2v) = f.eval(jet.value)?;
                Ok(jet.chain(v, dv, d2v))
            }
            Expr::Curve(curve, inner) => {
                let jet = inner.eval_jet(p)?;
                let (v, dv, d2v) = curve.eval2(jet.value)?;
                Ok(jet.chain(v, dv, d2v))
            }
            Expr::Xi(inv) => inv.xi_jet(p),
        }
    }

    /// Value only; used by stencils, predicates, and root finding.
    pub fn eval_value(&self, p: &Point) -> Result<f64> {
        let n = p.n();
        match &*self.0 {
            Expr::Const(c) => Ok(*c),
            Expr::Coord(i) => {
                if *i >= n {
                    return Err(Error::DimensionMismatch {
                        expected: i + 1,
                        got: n,
                    });
                }
                Ok(p[*i])
            }
            Expr::Linear { coeffs, offset } => {
                if coeffs.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: coeffs.len(),
                        got: n,
                    });
                }
                Ok(coeffs
                    .iter()
                    .zip(p.coords())
                    .fold(*offset, |acc, (c, x)| acc + c * x))
            }
            Expr::Add(a, b) => Ok(a.eval_value(p)? + b.eval_value(p)?),
            Expr::Sub(a, b) => Ok(a.eval_value(p)? - b.eval_value(p)?),
            Expr::Mul(a, b) => Ok(a.eval_value(p)? * b.eval_value(p)?),
            Expr::Div(a, b) => {
                let den = b.eval_value(p)?;
                if den.abs() <= EPS_SING {
                    return Err(Error::singular(format!("quotient denominator = {den}")));
                }
                Ok(a.eval_value(p)? / den)
            }
            Expr::Scale(a, f) => Ok(a * f.eval_value(p)?),
            Expr::Powi(f, m) => {
                let base = f.eval_value(p)?;
                if *m < 0 && base.abs() <= EPS_SING {
                    return Err(Error::singular(format!(
                        "negative power of near-zero base {base}"
                    )));
                }
                Ok(base.powi(*m))
            }
            Expr::Compose(f, inner) => Ok(f.eval(inner.eval_value(p)?)?.0),
            Expr::Curve(curve, inner) => Ok(curve.eval2(inner.eval_value(p)?)?.0),
            Expr::Xi(inv) => inv.xi_value(p),
        }
    }
}

impl std::ops::Add for ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: ScalarField) -> ScalarField {
        ScalarField::new(Expr::Add(self, rhs))
    }
}

impl std::ops::Sub for ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: ScalarField) -> ScalarField {
        ScalarField::new(Expr::Sub(self, rhs))
    }
}

impl std::ops::Mul for ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: ScalarField) -> ScalarField {
        ScalarField::new(Expr::Mul(self, rhs))
    }
}

impl std::ops::Div for ScalarField {
    type Output = ScalarField;
    fn div(self, rhs: ScalarField) -> ScalarField {
        ScalarField::new(Expr::Div(self, rhs))
    }
}

// ---- finite-difference oracle -------------------------------------------

fn shifted(p: &Point, axis: usize, delta: f64) -> Point {
    let mut coords = p.coords().to_vec();
    coords[axis] += delta;
    Point::new(coords).expect("shifted point stays valid")
}

fn shifted2(p: &Point, ai: usize, di: f64, aj: usize, dj: f64) -> Point {
    let mut coords = p.coords().to_vec();
    coords[ai] += di;
    coords[aj] += dj;
    Point::new(coords).expect("shifted point stays valid")
}

/// Central-difference jet with a single step `h`: exact value, O(h^2)
/// 2-point gradient, O(h^2) diagonal and 4-point mixed second derivatives.
///
/// Serves as the independent oracle for [`ScalarField::eval_jet`]; it only
/// ever asks the field for values.
pub fn fd_jet(field: &ScalarField, p: &Point, h: f64) -> Result<Jet2> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::invalid(format!("finite-difference step h = {h}")));
    }
    let n = p.n();
    let f0 = field.eval_value(p)?;
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];

    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    for i in 0..n {
        plus[i] = field.eval_value(&shifted(p, i, h))?;
        minus[i] = field.eval_value(&shifted(p, i, -h))?;
        grad[i] = (plus[i] - minus[i]) / (2.0 * h);
        hess[i * n + i] = (plus[i] - 2.0 * f0 + minus[i]) / (h * h);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let fpp = field.eval_value(&shifted2(p, i, h, j, h))?;
            let fpm = field.eval_value(&shifted2(p, i, h, j, -h))?;
            let fmp = field.eval_value(&shifted2(p, i, -h, j, h))?;
            let fmm = field.eval_value(&shifted2(p, i, -h, j, -h))?;
            hess[i * n + j] = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
        }
    }
    let jet = Jet2::from_parts(f0, grad, hess);
    if !jet.is_finite() {
        return Err(Error::NonFiniteResult);
    }
    Ok(jet)
}

/// Oracle with the default step split: gradients at h = 1e-5, Hessians at
/// h = 1e-4, each balancing truncation against cancellation in 64-bit floats.
pub fn fd_jet_default(field: &ScalarField, p: &Point) -> Result<Jet2> {
    let fine = fd_jet(field, p, FD_STEP_GRAD)?;
    let coarse = fd_jet(field, p, FD_STEP_HESS)?;
    let n = p.n();
    let mut hess = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            hess[i * n + j] = coarse.hess_entry(i, j);
        }
    }
    Ok(Jet2::from_parts(fine.value, fine.grad().to_vec(), hess))
}
