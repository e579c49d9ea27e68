//! One-dimensional C^2 functions with exact first and second derivatives.
//!
//! These appear in three roles: the outer reparametrization of a quadric
//! invariant, the analytic branch of a lapse profile U(xi), and the 1-D
//! composition nodes of a scalar-field expression.

use crate::defaults::EPS_SING;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A smooth real function of one variable, evaluatable to second order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Func1 {
    Identity,
    /// a*t + b
    Affine {
        a: f64,
        b: f64,
    },
    /// Coefficients in ascending degree order.
    Poly {
        coeffs: Vec<f64>,
    },
    Exp,
    /// Natural logarithm, defined for t > 0.
    Log,
    /// Defined for t > 0.
    Sqrt,
    Atan,
    /// 1/t, defined away from t = 0.
    Recip,
    /// t^r for real r, defined for t > 0.
    Power {
        exponent: f64,
    },
    /// The dilation-family lapse inverse,
    /// U(t) = k1 + (2k/sqrt(D)) * arctan((2*eta*t + theta)/sqrt(D)),
    /// with D = 4*eta*delta - theta^2 > 0.
    ArctanLapse {
        k: f64,
        k1: f64,
        eta: f64,
        theta: f64,
        delta: f64,
    },
}

impl Func1 {
    /// Value and first two derivatives at `t`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64, f64)> {
        match self {
            Func1::Identity => Ok((t, 1.0, 0.0)),
            Func1::Affine { a, b } => Ok((a * t + b, *a, 0.0)),
            Func1::Poly { coeffs } => Ok(eval_poly(coeffs, t)),
            Func1::Exp => {
                let e = t.exp();
                Ok((e, e, e))
            }
            Func1::Log => {
                if t <= EPS_SING {
                    return Err(Error::singular(format!("log of non-positive value {t}")));
                }
                Ok((t.ln(), 1.0 / t, -1.0 / (t * t)))
            }
            Func1::Sqrt => {
                if t <= EPS_SING {
                    return Err(Error::singular(format!("sqrt of non-positive value {t}")));
                }
                let s = t.sqrt();
                Ok((s, 0.5 / s, -0.25 / (s * t)))
            }
            Func1::Atan => {
                let d = 1.0 + t * t;
                Ok((t.atan(), 1.0 / d, -2.0 * t / (d * d)))
            }
            Func1::Recip => {
                if t.abs() <= EPS_SING {
                    return Err(Error::singular(format!("reciprocal near zero, t = {t}")));
                }
                let inv = 1.0 / t;
                Ok((inv, -inv * inv, 2.0 * inv * inv * inv))
            }
            Func1::Power { exponent } => {
                if t <= EPS_SING {
                    return Err(Error::singular(format!(
                        "real power of non-positive value {t}"
                    )));
                }
                let r = *exponent;
                let f = t.powf(r);
                Ok((f, r * t.powf(r - 1.0), r * (r - 1.0) * t.powf(r - 2.0)))
            }
            Func1::ArctanLapse {
                k,
                k1,
                eta,
                theta,
                delta,
            } => {
                let disc = 4.0 * eta * delta - theta * theta;
                if disc <= 0.0 {
                    return Err(Error::DegenerateDiscriminant(disc));
                }
                let root = disc.sqrt();
                // q(t) = eta t^2 + theta t + delta;  U' = k/q,  U'' = -k (2 eta t + theta)/q^2
                let arg = (2.0 * eta * t + theta) / root;
                let q = eta * t * t + theta * t + delta;
                let u = k1 + (2.0 * k / root) * arg.atan();
                Ok((u, k / q, -k * (2.0 * eta * t + theta) / (q * q)))
            }
        }
    }
}

fn eval_poly(coeffs: &[f64], t: f64) -> (f64, f64, f64) {
    // Horner evaluation of p, p', p'' in one pass.
    let mut p = 0.0;
    let mut dp = 0.0;
    let mut d2p = 0.0;
    for &c in coeffs.iter().rev() {
        d2p = d2p * t + 2.0 * dp;
        dp = dp * t + p;
        p = p * t + c;
    }
    (p, dp, d2p)
}
