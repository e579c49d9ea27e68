//! Pointwise residuals of every equation defining an electrostatic system.
//!
//! Both formulations are evaluated: the covariant equations (lapse,
//! Maxwell, Hessian, trace identity, and the scalar compatibility identity)
//! and the Cartesian first-order reformulation (off-diagonal, diagonal,
//! potential, and lapse equations). The electric field is derived from the
//! potential, E = grad_bar(psi)/N, so the closedness half of the Maxwell
//! system holds identically and is excluded from numerics.
//!
//! Each residual is reported in absolute terms and normalized by
//! 1 + max |individual summand| at the point: near centers the summands
//! blow up and an absolute tolerance alone is meaningless there.

use crate::conformal::{hessian_bar_at, ricci_bar_at, scalar_curvature_bar_at, SymTensorAtPoint};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::jet::{Jet2, Point};

/// Candidate data (n, phi, N, psi, Lambda) to be verified.
#[derive(Debug, Clone)]
pub struct SystemInstance {
    n: usize,
    phi: ScalarField,
    lapse: ScalarField,
    psi: ScalarField,
    lambda: f64,
}

impl SystemInstance {
    pub fn new(
        n: usize,
        phi: ScalarField,
        lapse: ScalarField,
        psi: ScalarField,
        lambda: f64,
    ) -> Self {
        SystemInstance {
            n,
            phi,
            lapse,
            psi,
            lambda,
        }
    }

    pub fn minkowski(n: usize) -> Self {
        SystemInstance::new(
            n,
            ScalarField::constant(1.0),
            ScalarField::constant(1.0),
            ScalarField::constant(0.0),
            0.0,
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn lapse(&self) -> &ScalarField {
        &self.lapse
    }

    pub fn psi(&self) -> &ScalarField {
        &self.psi
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Same data with a different cosmological constant.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        SystemInstance {
            lambda,
            ..self.clone()
        }
    }

    /// Same data with the lapse replaced (used by perturbation tests).
    pub fn with_lapse(&self, lapse: ScalarField) -> Self {
        SystemInstance {
            lapse,
            ..self.clone()
        }
    }

    /// Evaluate all three field jets, enforcing N > 0 and phi > 0.
    pub fn jets_at(&self, p: &Point) -> Result<SystemJets> {
        let fail = |e: Error| Error::domain(e.to_string());
        let phi = self.phi.eval_jet(p).map_err(fail)?;
        let lapse = self.lapse.eval_jet(p).map_err(fail)?;
        let psi = self.psi.eval_jet(p).map_err(fail)?;
        if phi.value <= 0.0 {
            return Err(Error::domain(format!(
                "conformal factor phi = {} is not positive",
                phi.value
            )));
        }
        if lapse.value <= 0.0 {
            return Err(Error::domain(format!(
                "lapse N = {} is not positive",
                lapse.value
            )));
        }
        Ok(SystemJets {
            n: self.n,
            lambda: self.lambda,
            phi,
            lapse,
            psi,
        })
    }
}

/// Jets of (phi, N, psi) at one point plus the constants of the instance.
#[derive(Debug, Clone)]
pub struct SystemJets {
    pub n: usize,
    pub lambda: f64,
    pub phi: Jet2,
    pub lapse: Jet2,
    pub psi: Jet2,
}

impl SystemJets {
    /// |E|^2_bar = phi^2 sum_k (psi_{,k})^2 / N^2.
    pub fn e_norm_sq(&self) -> f64 {
        let p2 = self.phi.value * self.phi.value;
        p2 * self.psi.grad_norm_sq() / (self.lapse.value * self.lapse.value)
    }
}

/// Running sum of displayed summands with the largest magnitude retained
/// for condition-aware normalization.
#[derive(Debug, Clone, Copy, Default)]
struct TermSum {
    sum: f64,
    max_abs: f64,
}

impl TermSum {
    fn push(&mut self, term: f64) {
        self.sum += term;
        let a = term.abs();
        if a > self.max_abs {
            self.max_abs = a;
        }
    }

    fn detail(self) -> ResidualDetail {
        ResidualDetail {
            signed: self.sum,
            absolute: self.sum.abs(),
            normalized: self.sum.abs() / (1.0 + self.max_abs),
        }
    }
}

/// One residual at one point.
#[derive(Debug, Clone, Copy)]
pub struct ResidualDetail {
    pub signed: f64,
    pub absolute: f64,
    pub normalized: f64,
}

impl ResidualDetail {
    fn max(self, other: ResidualDetail) -> ResidualDetail {
        // Componentwise max; used to aggregate tensor channels.
        ResidualDetail {
            signed: if other.absolute > self.absolute {
                other.signed
            } else {
                self.signed
            },
            absolute: self.absolute.max(other.absolute),
            normalized: self.normalized.max(other.normalized),
        }
    }
}

/// The nine residual channels, in report order.
pub const CHANNEL_NAMES: [&str; 9] = [
    "lapse",
    "maxwell",
    "hessian_max",
    "trace",
    "lemma23",
    "t1_offdiag",
    "t1_diag",
    "t1_psi",
    "t1_N",
];

/// Per-equation residual magnitudes at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualVector {
    pub lapse: f64,
    pub maxwell: f64,
    pub hessian_max: f64,
    pub trace: f64,
    pub lemma23: f64,
    pub theo1_offdiag_max: f64,
    pub theo1_diag_max: f64,
    pub theo1_psi: f64,
    pub theo1_lapse: f64,
}

impl ResidualVector {
    pub fn as_array(&self) -> [f64; 9] {
        [
            self.lapse,
            self.maxwell,
            self.hessian_max,
            self.trace,
            self.lemma23,
            self.theo1_offdiag_max,
            self.theo1_diag_max,
            self.theo1_psi,
            self.theo1_lapse,
        ]
    }

    pub fn max_entry(&self) -> f64 {
        self.as_array().iter().fold(0.0_f64, |m, v| m.max(*v))
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Absolute and normalized residual vectors side by side.
#[derive(Debug, Clone)]
pub struct ResidualSample {
    pub absolute: ResidualVector,
    pub normalized: ResidualVector,
}

// ---- individual equations -------------------------------------------------

/// |Delta_bar N - 2N((n-2)/(n-1) |E|^2 - Lambda/(n-1))|.
pub fn residual_lapse(sys: &SystemInstance, p: &Point) -> Result<f64> {
    Ok(lapse_detail(&sys.jets_at(p)?).absolute)
}

fn lapse_detail(j: &SystemJets) -> ResidualDetail {
    let nf = j.n as f64;
    let mut t = TermSum::default();
    let p = &j.phi;
    let f = &j.lapse;
    for i in 0..j.n {
        t.push(p.value * p.value * f.hess_entry(i, i));
        t.push(-(nf - 2.0) * p.value * p.grad_entry(i) * f.grad_entry(i));
    }
    t.push(-2.0 * f.value * (nf - 2.0) / (nf - 1.0) * j.e_norm_sq());
    t.push(2.0 * f.value * j.lambda / (nf - 1.0));
    t.detail()
}

/// |N Delta_bar psi - g_bar(grad psi, grad N)|, the divergence half of the
/// Maxwell system; the exactness half d(N E^flat) = 0 holds by the
/// potential representation N E = grad_bar psi and is not sampled.
pub fn residual_maxwell(sys: &SystemInstance, p: &Point) -> Result<f64> {
    Ok(maxwell_detail(&sys.jets_at(p)?).absolute)
}

fn maxwell_detail(j: &SystemJets) -> ResidualDetail {
    let nf = j.n as f64;
    let mut t = TermSum::default();
    let p = &j.phi;
    for i in 0..j.n {
        t.push(j.lapse.value * p.value * p.value * j.psi.hess_entry(i, i));
        t.push(-j.lapse.value * (nf - 2.0) * p.value * p.grad_entry(i) * j.psi.grad_entry(i));
        t.push(-p.value * p.value * j.psi.grad_entry(i) * j.lapse.grad_entry(i));
    }
    t.detail()
}

/// The componentwise residual tensor of the Hessian equation
/// Hess_bar N = N (Ric_bar - 2 Lambda/(n-1) g_bar + 2 E^flat x E^flat
///              - 2/(n-1) |E|^2 g_bar),
/// with (E^flat x E^flat)_{ij} = psi_{,i} psi_{,j} / N^2 and
/// g_bar_{ij} = delta_ij / phi^2.
pub fn residual_hessian(sys: &SystemInstance, p: &Point) -> Result<(SymTensorAtPoint, f64)> {
    let jets = sys.jets_at(p)?;
    let (tensor, detail) = hessian_detail(&jets);
    Ok((tensor, detail.absolute))
}

fn hessian_detail(j: &SystemJets) -> (SymTensorAtPoint, ResidualDetail) {
    let nf = j.n as f64;
    let hess = hessian_bar_at(&j.phi, &j.lapse);
    let ric = ricci_bar_at(&j.phi);
    let e2 = j.e_norm_sq();
    let gbar_diag = 1.0 / (j.phi.value * j.phi.value);

    let mut worst = ResidualDetail {
        signed: 0.0,
        absolute: 0.0,
        normalized: 0.0,
    };
    let tensor = SymTensorAtPoint::from_fn_sym(j.n, |i, k| {
        let mut t = TermSum::default();
        t.push(hess.get(i, k));
        t.push(-j.lapse.value * ric.get(i, k));
        t.push(-2.0 * j.psi.grad_entry(i) * j.psi.grad_entry(k) / j.lapse.value);
        if i == k {
            t.push(2.0 * j.lambda * j.lapse.value / (nf - 1.0) * gbar_diag);
            t.push(2.0 / (nf - 1.0) * e2 * j.lapse.value * gbar_diag);
        }
        let d = t.detail();
        worst = worst.max(d);
        d.signed
    });
    (tensor, worst)
}

/// |R_bar - 2(|E|^2 + Lambda)|, the contracted identity.
pub fn residual_trace(sys: &SystemInstance, p: &Point) -> Result<f64> {
    Ok(trace_detail(&sys.jets_at(p)?).absolute)
}

fn trace_detail(j: &SystemJets) -> ResidualDetail {
    let mut t = TermSum::default();
    t.push(scalar_curvature_bar_at(&j.phi));
    t.push(-2.0 * j.e_norm_sq());
    t.push(-2.0 * j.lambda);
    t.detail()
}

/// The scalar compatibility identity every solution must satisfy:
/// sum_k [2(n-1) N phi_{,kk} - n(n-1)(N/phi)(phi_{,k})^2
///        - 2(phi/N)(psi_{,k})^2] - 2 N Lambda / phi.
pub fn residual_lemma23(sys: &SystemInstance, p: &Point) -> Result<f64> {
    Ok(lemma23_detail(&sys.jets_at(p)?).absolute)
}

fn lemma23_detail(j: &SystemJets) -> ResidualDetail {
    let nf = j.n as f64;
    let mut t = TermSum::default();
    let p = &j.phi;
    for k in 0..j.n {
        t.push(2.0 * (nf - 1.0) * j.lapse.value * p.hess_entry(k, k));
        let gp = p.grad_entry(k);
        t.push(-nf * (nf - 1.0) * j.lapse.value / p.value * gp * gp);
        let gq = j.psi.grad_entry(k);
        t.push(-2.0 * p.value / j.lapse.value * gq * gq);
    }
    t.push(-2.0 * j.lapse.value * j.lambda / p.value);
    t.detail()
}

/// The four named residuals of the Cartesian reformulation.
#[derive(Debug, Clone, Copy)]
pub struct Theo1Residuals {
    /// max over i != j of the off-diagonal equation.
    pub offdiag_max: f64,
    /// max over i of the diagonal equation (with its full sums).
    pub diag_max: f64,
    /// The potential equation.
    pub psi: f64,
    /// The lapse equation.
    pub lapse: f64,
}

pub fn residual_theo1(sys: &SystemInstance, p: &Point) -> Result<Theo1Residuals> {
    let j = sys.jets_at(p)?;
    let (off, diag, psi, lap) = theo1_details(&j);
    Ok(Theo1Residuals {
        offdiag_max: off.absolute,
        diag_max: diag.absolute,
        psi: psi.absolute,
        lapse: lap.absolute,
    })
}

fn theo1_details(
    j: &SystemJets,
) -> (
    ResidualDetail,
    ResidualDetail,
    ResidualDetail,
    ResidualDetail,
) {
    let nf = j.n as f64;
    let n = j.n;
    let (p, f, q) = (&j.phi, &j.lapse, &j.psi);

    // Off-diagonal: (n-2) N phi_{,ij} - phi N_{,ij} - phi_{,i} N_{,j}
    //               - phi_{,j} N_{,i} + 2 (phi/N) psi_{,i} psi_{,j} = 0.
    let mut off = ResidualDetail {
        signed: 0.0,
        absolute: 0.0,
        normalized: 0.0,
    };
    for i in 0..n {
        for k in (i + 1)..n {
            let mut t = TermSum::default();
            t.push((nf - 2.0) * f.value * p.hess_entry(i, k));
            t.push(-p.value * f.hess_entry(i, k));
            t.push(-p.grad_entry(i) * f.grad_entry(k));
            t.push(-p.grad_entry(k) * f.grad_entry(i));
            t.push(2.0 * p.value / f.value * q.grad_entry(i) * q.grad_entry(k));
            off = off.max(t.detail());
        }
    }

    // Diagonal, for each i, minus its right-hand side 2 Lambda N/(n-1).
    let mut diag = ResidualDetail {
        signed: 0.0,
        absolute: 0.0,
        normalized: 0.0,
    };
    for i in 0..n {
        let mut t = TermSum::default();
        t.push(p.value * (nf - 2.0) * f.value * p.hess_entry(i, i));
        t.push(-p.value * p.value * f.hess_entry(i, i));
        t.push(-2.0 * p.value * p.grad_entry(i) * f.grad_entry(i));
        let qi = q.grad_entry(i);
        t.push(2.0 * p.value * p.value / f.value * qi * qi);
        for k in 0..n {
            t.push(p.value * p.hess_entry(k, k) * f.value);
            t.push(p.value * p.grad_entry(k) * f.grad_entry(k));
            let pk = p.grad_entry(k);
            t.push(-(nf - 1.0) * f.value * pk * pk);
            let qk = q.grad_entry(k);
            t.push(-2.0 * p.value * p.value / ((nf - 1.0) * f.value) * qk * qk);
        }
        t.push(-2.0 * j.lambda * f.value / (nf - 1.0));
        diag = diag.max(t.detail());
    }

    // Potential equation: sum_k [N phi psi_{,kk} - (n-2) N phi_{,k} psi_{,k}
    //                     - phi psi_{,k} N_{,k}] = 0.
    let mut psi_t = TermSum::default();
    for k in 0..n {
        psi_t.push(f.value * p.value * q.hess_entry(k, k));
        psi_t.push(-(nf - 2.0) * f.value * p.grad_entry(k) * q.grad_entry(k));
        psi_t.push(-p.value * q.grad_entry(k) * f.grad_entry(k));
    }

    // Lapse equation: sum_k [phi^2 N N_{,kk} - (n-2) phi phi_{,k} N N_{,k}
    //                 - 2(n-2)/(n-1) phi^2 (psi_{,k})^2] + 2 Lambda N^2/(n-1).
    let mut lap_t = TermSum::default();
    for k in 0..n {
        lap_t.push(p.value * p.value * f.value * f.hess_entry(k, k));
        lap_t.push(-(nf - 2.0) * p.value * p.grad_entry(k) * f.value * f.grad_entry(k));
        let qk = q.grad_entry(k);
        lap_t.push(-2.0 * (nf - 2.0) / (nf - 1.0) * p.value * p.value * qk * qk);
    }
    lap_t.push(2.0 * j.lambda * f.value * f.value / (nf - 1.0));

    (off, diag, psi_t.detail(), lap_t.detail())
}

/// All nine channels at one point, absolute and normalized.
pub fn residual_sample(sys: &SystemInstance, p: &Point) -> Result<ResidualSample> {
    let j = sys.jets_at(p)?;
    let lapse = lapse_detail(&j);
    let maxwell = maxwell_detail(&j);
    let (_, hess) = hessian_detail(&j);
    let trace = trace_detail(&j);
    let lemma = lemma23_detail(&j);
    let (off, diag, psi, lap) = theo1_details(&j);

    let abs = ResidualVector {
        lapse: lapse.absolute,
        maxwell: maxwell.absolute,
        hessian_max: hess.absolute,
        trace: trace.absolute,
        lemma23: lemma.absolute,
        theo1_offdiag_max: off.absolute,
        theo1_diag_max: diag.absolute,
        theo1_psi: psi.absolute,
        theo1_lapse: lap.absolute,
    };
    let norm = ResidualVector {
        lapse: lapse.normalized,
        maxwell: maxwell.normalized,
        hessian_max: hess.normalized,
        trace: trace.normalized,
        lemma23: lemma.normalized,
        theo1_offdiag_max: off.normalized,
        theo1_diag_max: diag.normalized,
        theo1_psi: psi.normalized,
        theo1_lapse: lap.normalized,
    };
    if !abs.is_finite() {
        return Err(Error::domain("non-finite residual"));
    }
    Ok(ResidualSample {
        absolute: abs,
        normalized: norm,
    })
}

/// Signed trace (with g_bar^{-1} = phi^2 delta) of the Hessian residual
/// tensor; equals lapse_residual - N * trace_residual (signed) through the
/// contraction that derives the trace identity. Exposed for the algebraic
/// contraction oracle.
pub fn hessian_residual_gbar_trace(sys: &SystemInstance, p: &Point) -> Result<f64> {
    let j = sys.jets_at(p)?;
    let (tensor, _) = hessian_detail(&j);
    Ok(j.phi.value * j.phi.value * tensor.trace())
}

/// Signed lapse and trace residuals, for the same oracle.
pub fn signed_lapse_and_trace(sys: &SystemInstance, p: &Point) -> Result<(f64, f64)> {
    let j = sys.jets_at(p)?;
    Ok((lapse_detail(&j).signed, trace_detail(&j).signed))
}
