//! Second-order jets: value, gradient, and Hessian of a scalar field at a
//! point, propagated exactly through arithmetic and 1-D composition.
//!
//! The derivative convention is `F` (value), `F_{,i}` (gradient entry), and
//! `F_{,ij}` (Hessian entry). Hessians are stored as full `n x n` matrices
//! whose two triangles are written from the same computed `f64`, so symmetry
//! holds bitwise by construction.

use crate::error::{Error, Result};

/// A point of the flat background chart, Cartesian coordinates `x_1..x_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    /// Requires n >= 3 and finite coordinates.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 3 {
            return Err(Error::invalid(format!(
                "points live in dimension n >= 3, got n = {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("point has a non-finite coordinate"));
        }
        Ok(Point { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    /// Euclidean norm |x|.
    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// The point s*x (used by the dilation-invariance checks).
    pub fn scaled(&self, s: f64) -> Point {
        Point {
            coords: self.coords.iter().map(|c| s * c).collect(),
        }
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

/// Value, gradient, and Hessian of a scalar field at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>, // row-major n*n, both triangles written from one f64
}

impl Jet2 {
    pub fn zeros(n: usize) -> Self {
        Jet2 {
            value: 0.0,
            grad: vec![0.0; n],
            hess: vec![0.0; n * n],
        }
    }

    pub fn constant(value: f64, n: usize) -> Self {
        Jet2 {
            value,
            ..Jet2::zeros(n)
        }
    }

    /// The jet of the coordinate projection x -> x_i.
    pub fn coordinate(value: f64, i: usize, n: usize) -> Self {
        let mut jet = Jet2::constant(value, n);
        jet.grad[i] = 1.0;
        jet
    }

    /// Assemble from parts; the Hessian is symmetrized by copying the upper
    /// triangle over the lower one.
    pub fn from_parts(value: f64, grad: Vec<f64>, mut hess: Vec<f64>) -> Self {
        let n = grad.len();
        assert_eq!(hess.len(), n * n, "hessian must be n*n");
        for i in 0..n {
            for j in (i + 1)..n {
                hess[j * n + i] = hess[i * n + j];
            }
        }
        Jet2 { value, grad, hess }
    }

    pub fn n(&self) -> usize {
        self.grad.len()
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn grad_entry(&self, i: usize) -> f64 {
        self.grad[i]
    }

    pub fn hess_entry(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.n() + j]
    }

    fn set_hess(&mut self, i: usize, j: usize, v: f64) {
        let n = self.n();
        self.hess[i * n + j] = v;
        self.hess[j * n + i] = v;
    }

    /// Sum of squared gradient entries, |grad F|^2 of the flat metric.
    pub fn grad_norm_sq(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum()
    }

    /// Trace of the Hessian, the flat Laplacian.
    pub fn laplacian(&self) -> f64 {
        let n = self.n();
        (0..n).map(|i| self.hess[i * n + i]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.hess.iter().all(|h| h.is_finite())
    }

    // ---- jet arithmetic -------------------------------------------------

    pub fn add(&self, rhs: &Jet2) -> Jet2 {
        self.zip(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Jet2) -> Jet2 {
        self.zip(rhs, |a, b| a - b)
    }

    pub fn scale(&self, a: f64) -> Jet2 {
        self.map(|v| a * v)
    }

    /// Product rule to second order:
    /// `(FG)_{,ij} = F_{,ij} G + F_{,i} G_{,j} + F_{,j} G_{,i} + F G_{,ij}`.
    pub fn mul(&self, rhs: &Jet2) -> Jet2 {
        let n = self.n();
        debug_assert_eq!(n, rhs.n());
        let mut out = Jet2::zeros(n);
        out.value = self.value * rhs.value;
        for i in 0..n {
            out.grad[i] = self.grad[i] * rhs.value + self.value * rhs.grad[i];
        }
        for i in 0..n {
            for j in i..n {
                let v = self.hess_entry(i, j) * rhs.value
                    + self.grad[i] * rhs.grad[j]
                    + self.grad[j] * rhs.grad[i]
                    + self.value * rhs.hess_entry(i, j);
                out.set_hess(i, j, v);
            }
        }
        out
    }

    /// Reciprocal, `(1/F)' = -F'/F^2`, `(1/F)'' = -F''/F^2 + 2 (F')^2/F^3`.
    pub fn recip(&self) -> Jet2 {
        let inv = 1.0 / self.value;
        self.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }

    pub fn div(&self, rhs: &Jet2) -> Jet2 {
        self.mul(&rhs.recip())
    }

    /// Compose with a 1-D function given its value and first two derivatives
    /// at `self.value`:
    /// `(f o F)_{,i} = f' F_{,i}`, `(f o F)_{,ij} = f'' F_{,i} F_{,j} + f' F_{,ij}`.
    pub fn chain(&self, f: f64, df: f64, d2f: f64) -> Jet2 {
        let n = self.n();
        let mut out = Jet2::zeros(n);
        out.value = f;
        for i in 0..n {
            out.grad[i] = df * self.grad[i];
        }
        for i in 0..n {
            for j in i..n {
                let v = d2f * self.grad[i] * self.grad[j] + df * self.hess_entry(i, j);
                out.set_hess(i, j, v);
            }
        }
        out
    }

    /// Integer power, valid for any base when m >= 0 and nonzero base otherwise.
    pub fn powi(&self, m: i32) -> Jet2 {
        let v = self.value;
        let f = v.powi(m);
        let df = f64::from(m) * v.powi(m - 1);
        let d2f = f64::from(m) * f64::from(m - 1) * v.powi(m - 2);
        self.chain(f, df, d2f)
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Jet2 {
        Jet2 {
            value: f(self.value),
            grad: self.grad.iter().map(|&g| f(g)).collect(),
            hess: self.hess.iter().map(|&h| f(h)).collect(),
        }
    }

    fn zip(&self, rhs: &Jet2, f: impl Fn(f64, f64) -> f64) -> Jet2 {
        debug_assert_eq!(self.n(), rhs.n());
        Jet2 {
            value: f(self.value, rhs.value),
            grad: self
                .grad
                .iter()
                .zip(&rhs.grad)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            hess: self
                .hess
                .iter()
                .zip(&rhs.hess)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly_jet() -> Jet2 {
        // F = x1^2 + x2 at p = (1, 2, 0)
        let x1 = Jet2::coordinate(1.0, 0, 3);
        let x2 = Jet2::coordinate(2.0, 1, 3);
        x1.mul(&x1).add(&x2)
    }

    #[test]
    fn polynomial_jet_values() {
        let j = poly_jet();
        assert_eq!(j.value, 3.0);
        assert_eq!(j.grad(), &[2.0, 1.0, 0.0]);
        assert_eq!(j.hess_entry(0, 0), 2.0);
        assert_eq!(j.hess_entry(1, 1), 0.0);
        assert_eq!(j.hess_entry(0, 1), 0.0);
    }

    #[test]
    fn constant_jet_is_flat() {
        let j = Jet2::constant(1.0, 4);
        assert_eq!(j.value, 1.0);
        assert!(j.grad().iter().all(|&g| g == 0.0));
        assert_eq!(j.laplacian(), 0.0);
    }

    #[test]
    fn hessian_symmetry_is_bitwise() {
        let x1 = Jet2::coordinate(0.7, 0, 3);
        let x2 = Jet2::coordinate(-1.3, 1, 3);
        let j = x1.mul(&x2).recip().mul(&x1.add(&x2));
        for i in 0..3 {
            for j2 in 0..3 {
                assert_eq!(j.hess_entry(i, j2).to_bits(), j.hess_entry(j2, i).to_bits());
            }
        }
    }

    #[test]
    fn reciprocal_chain() {
        // 1/x1 at x1 = 2: value 0.5, d = -0.25, d2 = 0.25
        let j = Jet2::coordinate(2.0, 0, 3).recip();
        assert!((j.value - 0.5).abs() < 1e-15);
        assert!((j.grad_entry(0) + 0.25).abs() < 1e-15);
        assert!((j.hess_entry(0, 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn point_rejects_low_dimension() {
        assert!(Point::new(vec![1.0, 2.0]).is_err());
        assert!(Point::new(vec![1.0, 2.0, f64::NAN]).is_err());
        assert!(Point::new(vec![1.0, 2.0, 3.0]).is_ok());
    }
}
