//! Constructors for the closed-form solution families and the structural
//! identities tying phi and psi to the lapse.
//!
//! Both families share one convention: with g_bar = g/phi^2, the function
//! U = 1/N is flat-harmonic, phi = N^{1/(n-2)}, and
//! psi = sign * sqrt((n-1)/(2(n-2))) * (1 - N), with vanishing cosmological
//! constant. The multi-centered family takes U from superposed kernels
//! k*lambda_l / r_l^{n-2} - k1; the dilation family takes U from a
//! rational-arctangent profile of the degree-zero invariant M/P.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::func1::Func1;
use crate::invariants::{DilationInvariant, HarmonicPoleInvariant, InvariantField};
use crate::jet::Point;
use crate::residuals::SystemInstance;
use crate::rng::CounterRng;
use std::sync::Arc;

/// The coefficient sqrt((n-1)/(2(n-2))) in the potential identity.
pub fn psi_coefficient(n: usize) -> f64 {
    let nf = n as f64;
    ((nf - 1.0) / (2.0 * (nf - 2.0))).sqrt()
}

fn check_sign(sign: i8) -> Result<f64> {
    match sign {
        1 => Ok(1.0),
        -1 => Ok(-1.0),
        _ => Err(Error::invalid(format!("sign must be +1 or -1, got {sign}"))),
    }
}

/// Assemble (phi, N, psi) from a positive U = 1/N field: N = 1/U,
/// phi = U^{-1/(n-2)}, psi = sign * coeff * (1 - N), Lambda = 0.
pub fn mp_system_from_u(n: usize, u: &ScalarField, sign: i8) -> Result<SystemInstance> {
    let s = check_sign(sign)?;
    let nf = n as f64;
    let lapse = u.recip();
    let phi = u.powf(-1.0 / (nf - 2.0));
    let psi = (ScalarField::constant(1.0) - u.recip()).scale(s * psi_coefficient(n));
    Ok(SystemInstance::new(n, phi, lapse, psi, 0.0))
}

// ---- multi-centered family ------------------------------------------------

/// The multi-centered family: U(x) = sum_l k lambda_l / r_l^{n-2} - k1.
/// With k = 1, k1 = -1 and lambda_l the charges this is the classical
/// multi-black-hole solution U = 1 + sum_l q_l / r_l^{n-2}.
#[derive(Debug, Clone)]
pub struct MultiCenterMp {
    n: usize,
    k: f64,
    k1: f64,
    sign: i8,
    /// None when every weight vanishes (the flat limit).
    inv: Option<Arc<HarmonicPoleInvariant>>,
}

impl MultiCenterMp {
    pub fn new(
        n: usize,
        centers: Vec<Vec<f64>>,
        weights: Vec<f64>,
        k: f64,
        k1: f64,
        sign: i8,
    ) -> Result<Self> {
        if k == 0.0 {
            return Err(Error::ZeroSlope);
        }
        check_sign(sign)?;
        if n < 3 {
            return Err(Error::invalid("the family needs n >= 3"));
        }
        if centers.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("every center must have n coordinates"));
        }
        let inv = if weights.iter().all(|&w| w == 0.0) {
            None
        } else {
            Some(Arc::new(HarmonicPoleInvariant::new(centers, weights)?))
        };
        Ok(MultiCenterMp {
            n,
            k,
            k1,
            sign,
            inv,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn invariant(&self) -> Option<&Arc<HarmonicPoleInvariant>> {
        self.inv.as_ref()
    }

    pub fn xi_field(&self) -> Option<ScalarField> {
        self.inv
            .as_ref()
            .map(|inv| InvariantField::Pole(inv.clone()).field())
    }

    /// U = -(k xi + k1) with xi = -sum_l lambda_l r_l^{2-n}, i.e.
    /// U = sum_l k lambda_l / r_l^{n-2} - k1.
    pub fn u_field(&self) -> ScalarField {
        match self.xi_field() {
            Some(xi) => xi.scale(-self.k) + ScalarField::constant(-self.k1),
            None => ScalarField::constant(-self.k1),
        }
    }

    pub fn system(&self) -> Result<SystemInstance> {
        mp_system_from_u(self.n, &self.u_field(), self.sign)
    }
}

/// Build the multi-centered instance directly.
pub fn build_multicenter(
    n: usize,
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    k: f64,
    k1: f64,
    sign: i8,
) -> Result<SystemInstance> {
    MultiCenterMp::new(n, centers, weights, k, k1, sign)?.system()
}

// ---- dilation-invariant family ---------------------------------------------

/// The dilation-invariant family with lapse
/// 1/N = k1 + (2k/sqrt(D)) arctan((2 eta xi + theta)/sqrt(D)), D > 0.
#[derive(Debug, Clone)]
pub struct DilationMp {
    inv: Arc<DilationInvariant>,
    k: f64,
    k1: f64,
    sign: i8,
}

impl DilationMp {
    pub fn new(inv: DilationInvariant, k: f64, k1: f64, sign: i8) -> Result<Self> {
        if k == 0.0 {
            return Err(Error::ZeroSlope);
        }
        check_sign(sign)?;
        // D > 0 is enforced by the invariant's constructor.
        Ok(DilationMp {
            inv: Arc::new(inv),
            k,
            k1,
            sign,
        })
    }

    pub fn n(&self) -> usize {
        self.inv.n()
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn invariant(&self) -> &Arc<DilationInvariant> {
        &self.inv
    }

    pub fn xi_field(&self) -> ScalarField {
        InvariantField::Dilation(self.inv.clone()).field()
    }

    /// The lapse profile U(t) as a 1-D function of the invariant.
    pub fn u_profile(&self) -> Func1 {
        let (eta, theta, delta) = self.inv.quadratic_coefficients();
        Func1::ArctanLapse {
            k: self.k,
            k1: self.k1,
            eta,
            theta,
            delta,
        }
    }

    /// U through the analytic invariant jets.
    pub fn u_field(&self) -> ScalarField {
        self.xi_field().compose(self.u_profile())
    }

    /// The equivalent displayed form
    /// k1 + (2k/sqrt(D)) arctan((theta P + 2 eta M)/(sqrt(D) P)),
    /// built from generic expression nodes; agrees with [`Self::u_field`]
    /// wherever P != 0.
    pub fn u_field_alt(&self) -> ScalarField {
        let n = self.n();
        let (eta, theta, _) = self.inv.quadratic_coefficients();
        let root = self.inv.discriminant().sqrt();
        let mut num = vec![0.0; n];
        let mut den = vec![0.0; n];
        for (i, &ai) in self.inv.a().iter().enumerate() {
            num[i] += 2.0 * eta * ai;
        }
        for (j, &bj) in self.inv.b().iter().enumerate() {
            num[j] += theta * bj;
            den[j] = root * bj;
        }
        let ratio = ScalarField::linear(num, 0.0) / ScalarField::linear(den, 0.0);
        ratio.atan().scale(2.0 * self.k / root) + ScalarField::constant(self.k1)
    }

    pub fn system(&self) -> Result<SystemInstance> {
        mp_system_from_u(self.n(), &self.u_field(), self.sign)
    }

    /// The open interval (A, B) containing 1/N everywhere:
    /// A, B = k1 -+ |k| pi / sqrt(D).
    pub fn lapse_bounds(&self) -> (f64, f64) {
        let half = self.k.abs() * std::f64::consts::PI / self.inv.discriminant().sqrt();
        (self.k1 - half, self.k1 + half)
    }

    /// When A > 0, certified constants c1 g <= g_bar <= c2 g on the domain:
    /// the metric ratio g_bar_11/g_11 = 1/phi^2 = U^{2/(n-2)} lies in
    /// (A^{2/(n-2)}, B^{2/(n-2)}).
    pub fn uniform_equivalence(&self) -> Result<(f64, f64)> {
        let (a, b) = self.lapse_bounds();
        if a <= 0.0 {
            return Err(Error::NonPositiveLowerBound(a));
        }
        let e = 2.0 / (self.n() as f64 - 2.0);
        Ok((a.powf(e), b.powf(e)))
    }
}

/// Build the dilation instance, spot-checking that the two displayed forms
/// of the lapse agree away from the P = 0 hyperplane.
pub fn build_dilation(inv: DilationInvariant, k: f64, k1: f64, sign: i8) -> Result<SystemInstance> {
    let family = DilationMp::new(inv, k, k1, sign)?;
    let (u, alt) = (family.u_field(), family.u_field_alt());
    let n = family.n();
    let mut rng = CounterRng::new(0x00D11A710);
    let mut checked = 0;
    while checked < 8 {
        let coords: Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let Ok(p) = Point::new(coords) else { continue };
        let (Ok(a), Ok(b)) = (u.eval_value(&p), alt.eval_value(&p)) else {
            continue;
        };
        if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
            return Err(Error::invalid(format!(
                "the two arctangent lapse forms disagree: {a} vs {b}"
            )));
        }
        checked += 1;
    }
    family.system()
}

// ---- structural identities --------------------------------------------------

/// Pointwise violation of the class relations
/// phi'/phi = N'/((n-2) N) and (psi')^2 = (n-1)/(2(n-2)) (N')^2,
/// as gradient identities:
/// r_phi = max_i |(n-2) phi_{,i}/phi - N_{,i}/N|,
/// r_psi = | |grad psi|^2 - (n-1)/(2(n-2)) |grad N|^2 |.
pub fn mp_identity_residuals(sys: &SystemInstance, p: &Point) -> Result<(f64, f64)> {
    let j = sys.jets_at(p)?;
    let nf = sys.n() as f64;
    let mut r_phi = 0.0_f64;
    for i in 0..sys.n() {
        let lhs = (nf - 2.0) * j.phi.grad_entry(i) / j.phi.value;
        let rhs = j.lapse.grad_entry(i) / j.lapse.value;
        r_phi = r_phi.max((lhs - rhs).abs());
    }
    let coeff = (nf - 1.0) / (2.0 * (nf - 2.0));
    let r_psi = (j.psi.grad_norm_sq() - coeff * j.lapse.grad_norm_sq()).abs();
    Ok((r_phi, r_psi))
}
