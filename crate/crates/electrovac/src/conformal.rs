//! Curvature and differential operators of the conformal metric
//! g_bar = g/phi^2 over the flat background, in Cartesian components.
//!
//! Everything here is a closed-form function of the jets of the conformal
//! factor phi (and of the field being differentiated): Christoffel symbols,
//! the conformal Hessian and Laplacian, the Ricci tensor, and the scalar
//! curvature. Two independent routes to the conformal Hessian are shipped;
//! the Christoffel assembly exists as a test oracle for the direct formulas.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::jet::{Jet2, Point};

/// Symmetric rank-2 tensor components at a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorAtPoint {
    n: usize,
    data: Vec<f64>,
}

impl SymTensorAtPoint {
    pub fn zeros(n: usize) -> Self {
        SymTensorAtPoint {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Build from an upper-triangle generator; both triangles receive the
    /// same f64, so symmetry is bitwise.
    pub fn from_fn_sym(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut t = SymTensorAtPoint::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                t.data[i * n + j] = v;
                t.data[j * n + i] = v;
            }
        }
        t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Plain coordinate trace sum_i T_ii.
    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Connection coefficients Gamma^k_{ij} at a single point.
#[derive(Debug, Clone)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }
}

/// The conformal background: dimension and conformal factor phi with
/// g_bar = g/phi^2. phi must be positive wherever it is evaluated.
#[derive(Debug, Clone)]
pub struct ConformalFrame {
    n: usize,
    phi: ScalarField,
}

impl ConformalFrame {
    pub fn new(n: usize, phi: ScalarField) -> Self {
        ConformalFrame { n, phi }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn phi_jet(&self, p: &Point) -> Result<Jet2> {
        let jet = self.phi.eval_jet(p)?;
        check_positive(&jet)?;
        Ok(jet)
    }

    pub fn christoffel(&self, p: &Point) -> Result<Christoffel> {
        Ok(christoffel_at(&self.phi_jet(p)?))
    }

    pub fn hessian_bar(&self, field: &ScalarField, p: &Point) -> Result<SymTensorAtPoint> {
        let phi = self.phi_jet(p)?;
        let f = field.eval_jet(p)?;
        Ok(hessian_bar_at(&phi, &f))
    }

    /// Oracle route: assemble the Hessian from Christoffel symbols as
    /// F_{,ij} - sum_k Gamma^k_{ij} F_{,k}.
    pub fn hessian_bar_via_christoffel(
        &self,
        field: &ScalarField,
        p: &Point,
    ) -> Result<SymTensorAtPoint> {
        let phi = self.phi_jet(p)?;
        let f = field.eval_jet(p)?;
        Ok(hessian_bar_via_christoffel_at(&phi, &f))
    }

    pub fn laplacian_bar(&self, field: &ScalarField, p: &Point) -> Result<f64> {
        let phi = self.phi_jet(p)?;
        let f = field.eval_jet(p)?;
        Ok(laplacian_bar_at(&phi, &f))
    }

    pub fn ricci_bar(&self, p: &Point) -> Result<SymTensorAtPoint> {
        Ok(ricci_bar_at(&self.phi_jet(p)?))
    }

    pub fn scalar_curvature_bar(&self, p: &Point) -> Result<f64> {
        Ok(scalar_curvature_bar_at(&self.phi_jet(p)?))
    }

    pub fn grad_norm_bar(&self, field: &ScalarField, p: &Point) -> Result<f64> {
        let phi = self.phi_jet(p)?;
        let f = field.eval_jet(p)?;
        Ok(inner_bar_at(&phi, &f, &f))
    }

    pub fn inner_bar(&self, f: &ScalarField, g: &ScalarField, p: &Point) -> Result<f64> {
        let phi = self.phi_jet(p)?;
        Ok(inner_bar_at(&phi, &f.eval_jet(p)?, &g.eval_jet(p)?))
    }
}

pub(crate) fn check_positive(phi: &Jet2) -> Result<()> {
    if phi.value <= 0.0 {
        return Err(Error::NonPositiveConformalFactor(phi.value));
    }
    Ok(())
}

/// Gamma^k_{ij} of g/phi^2: zero for distinct indices,
/// Gamma^i_{ij} = -phi_{,j}/phi, Gamma^k_{ii} = phi_{,k}/phi (k != i),
/// Gamma^i_{ii} = -phi_{,i}/phi.
pub fn christoffel_at(phi: &Jet2) -> Christoffel {
    let n = phi.n();
    let mut data = vec![0.0; n * n * n];
    let w: Vec<f64> = (0..n).map(|k| phi.grad_entry(k) / phi.value).collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let v = if i == j {
                    if k == i {
                        -w[i]
                    } else {
                        w[k]
                    }
                } else if k == i {
                    -w[j]
                } else if k == j {
                    -w[i]
                } else {
                    0.0
                };
                data[(k * n + i) * n + j] = v;
            }
        }
    }
    Christoffel { n, data }
}

/// Conformal Hessian, direct formulas:
/// off-diagonal (i != j):  F_{,ij} + (phi_{,j} F_{,i} + phi_{,i} F_{,j})/phi;
/// diagonal:  F_{,ii} + 2 phi_{,i} F_{,i}/phi - (1/phi) sum_k phi_{,k} F_{,k}.
pub fn hessian_bar_at(phi: &Jet2, f: &Jet2) -> SymTensorAtPoint {
    let n = phi.n();
    let dot: f64 = (0..n).map(|k| phi.grad_entry(k) * f.grad_entry(k)).sum();
    SymTensorAtPoint::from_fn_sym(n, |i, j| {
        if i == j {
            f.hess_entry(i, i) + 2.0 * phi.grad_entry(i) * f.grad_entry(i) / phi.value
                - dot / phi.value
        } else {
            f.hess_entry(i, j)
                + (phi.grad_entry(j) * f.grad_entry(i) + phi.grad_entry(i) * f.grad_entry(j))
                    / phi.value
        }
    })
}

pub fn hessian_bar_via_christoffel_at(phi: &Jet2, f: &Jet2) -> SymTensorAtPoint {
    let n = phi.n();
    let gamma = christoffel_at(phi);
    SymTensorAtPoint::from_fn_sym(n, |i, j| {
        let correction: f64 = (0..n).map(|k| gamma.get(k, i, j) * f.grad_entry(k)).sum();
        f.hess_entry(i, j) - correction
    })
}

/// Delta_bar F = sum_i [phi^2 F_{,ii} - (n-2) phi phi_{,i} F_{,i}].
pub fn laplacian_bar_at(phi: &Jet2, f: &Jet2) -> f64 {
    let n = phi.n();
    let nf = n as f64;
    (0..n)
        .map(|i| {
            phi.value * phi.value * f.hess_entry(i, i)
                - (nf - 2.0) * phi.value * phi.grad_entry(i) * f.grad_entry(i)
        })
        .sum()
}

/// Ric_bar = (1/phi^2) ((n-2) phi Hess_g phi + [phi Lap_g phi
///            - (n-1)|grad_g phi|^2] g), components over delta_ij.
pub fn ricci_bar_at(phi: &Jet2) -> SymTensorAtPoint {
    let n = phi.n();
    let nf = n as f64;
    let lap = phi.laplacian();
    let gn2 = phi.grad_norm_sq();
    let diag = phi.value * lap - (nf - 1.0) * gn2;
    let inv_p2 = 1.0 / (phi.value * phi.value);
    SymTensorAtPoint::from_fn_sym(n, |i, j| {
        let kron = if i == j { diag } else { 0.0 };
        inv_p2 * ((nf - 2.0) * phi.value * phi.hess_entry(i, j) + kron)
    })
}

/// R_bar = (n-1)(2 phi Lap_g phi - n |grad_g phi|^2).
pub fn scalar_curvature_bar_at(phi: &Jet2) -> f64 {
    let n = phi.n() as f64;
    (n - 1.0) * (2.0 * phi.value * phi.laplacian() - n * phi.grad_norm_sq())
}

/// g_bar(grad_bar F, grad_bar G) = phi^2 sum_i F_{,i} G_{,i}.
pub fn inner_bar_at(phi: &Jet2, f: &Jet2, g: &Jet2) -> f64 {
    let n = phi.n();
    let dot: f64 = (0..n).map(|i| f.grad_entry(i) * g.grad_entry(i)).sum();
    phi.value * phi.value * dot
}
