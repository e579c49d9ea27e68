//! The ansatz invariants xi whose level sets carry a solution's symmetry:
//! quadric, dilation, and harmonic-pole families, each with closed-form
//! jets, plus the separability diagnostics that justify reducing the PDE
//! system to an ODE along xi.

use crate::defaults::{EPS_CENTER, EPS_GRAD, EPS_SING, TOL_SEP};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::func1::Func1;
use crate::jet::{Jet2, Point};
use crate::rng::CounterRng;
use std::sync::Arc;

/// xi = Gamma(sum_k tau x_k^2 + gamma_k x_k + theta_k).
///
/// Covers translation symmetry (tau = 0) and rotational symmetry (tau != 0).
/// The outer reparametrization defaults to the identity; lapse, potential,
/// and conformal factor are themselves free functions of xi, so Gamma adds
/// no generality.
#[derive(Debug, Clone)]
pub struct QuadricInvariant {
    tau: f64,
    gamma: Vec<f64>,
    theta: Vec<f64>,
    outer: Func1,
    beta: f64,
}

impl QuadricInvariant {
    pub fn new(tau: f64, gamma: Vec<f64>, theta: Vec<f64>, outer: Option<Func1>) -> Result<Self> {
        let n = gamma.len();
        if n < 3 {
            return Err(Error::invalid("quadric invariant needs n >= 3"));
        }
        if theta.len() != n {
            return Err(Error::invalid("gamma and theta must have equal length"));
        }
        if tau == 0.0 && gamma.iter().all(|&g| g == 0.0) {
            return Err(Error::invalid(
                "tau and all gamma_k vanish: xi is constant and grad(xi) = 0",
            ));
        }
        let beta = gamma
            .iter()
            .zip(&theta)
            .map(|(g, t)| g * g - 4.0 * tau * t)
            .sum();
        Ok(QuadricInvariant {
            tau,
            gamma,
            theta,
            outer: outer.unwrap_or(Func1::Identity),
            beta,
        })
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// beta = sum_k (gamma_k^2 - 4 tau theta_k).
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn has_identity_outer(&self) -> bool {
        self.outer == Func1::Identity
    }

    /// The inner polynomial q(x) and its jets; xi = Gamma(q).
    fn inner_jet(&self, p: &Point) -> Result<Jet2> {
        let n = self.check_dim(p)?;
        let mut value = 0.0;
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        for k in 0..n {
            let x = p[k];
            value += self.tau * x * x + self.gamma[k] * x + self.theta[k];
            grad[k] = 2.0 * self.tau * x + self.gamma[k];
            hess[k * n + k] = 2.0 * self.tau;
        }
        Ok(Jet2::from_parts(value, grad, hess))
    }

    pub fn xi_jet(&self, p: &Point) -> Result<Jet2> {
        let inner = self.inner_jet(p)?;
        let (v, dv, d2v) = self.outer.eval(inner.value)?;
        Ok(inner.chain(v, dv, d2v))
    }

    pub fn xi_value(&self, p: &Point) -> Result<f64> {
        let inner = self.inner_jet(p)?;
        Ok(self.outer.eval(inner.value)?.0)
    }

    fn check_dim(&self, p: &Point) -> Result<usize> {
        if p.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: p.n(),
            });
        }
        Ok(p.n())
    }
}

/// xi = M(x)/P(x) with M = sum a_i x_i over the first m1 axes and
/// P = sum b_j x_j over the first m2 axes; homogeneous of degree zero,
/// hence invariant under the (n-1)-dimensional group of dilations.
#[derive(Debug, Clone)]
pub struct DilationInvariant {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    eta: f64,
    theta: f64,
    delta: f64,
    disc: f64,
}

impl DilationInvariant {
    /// Enforces the hypotheses 1 <= m1 <= m2 <= n, sum a_i != 0, every
    /// b_j != 0, and a positive discriminant 4*eta*delta - theta^2 (zero
    /// discriminant makes xi constant).
    pub fn new(n: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let m1 = a.len();
        let m2 = b.len();
        if n < 3 {
            return Err(Error::invalid("dilation invariant needs n >= 3"));
        }
        if m1 < 1 || m1 > m2 || m2 > n {
            return Err(Error::invalid(format!(
                "need 1 <= m1 <= m2 <= n, got m1 = {m1}, m2 = {m2}, n = {n}"
            )));
        }
        if a.iter().sum::<f64>() == 0.0 {
            return Err(Error::invalid("sum of a_i must be nonzero"));
        }
        if b.contains(&0.0) {
            return Err(Error::invalid("every b_j must be nonzero"));
        }
        let eta: f64 = b.iter().map(|bj| bj * bj).sum();
        let theta: f64 = -2.0 * a.iter().zip(&b).map(|(ai, bi)| ai * bi).sum::<f64>();
        let delta: f64 = a.iter().map(|ai| ai * ai).sum();
        let disc = 4.0 * eta * delta - theta * theta;
        if disc <= 0.0 {
            return Err(Error::DegenerateDiscriminant(disc));
        }
        Ok(DilationInvariant {
            n,
            a,
            b,
            eta,
            theta,
            delta,
            disc,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m1(&self) -> usize {
        self.a.len()
    }

    pub fn m2(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// (eta, theta, delta) with eta = sum b_k^2, theta = -2 sum a_k b_k,
    /// delta = sum a_k^2, so that P^2 |grad xi|^2 = eta xi^2 + theta xi + delta.
    pub fn quadratic_coefficients(&self) -> (f64, f64, f64) {
        (self.eta, self.theta, self.delta)
    }

    /// 4*eta*delta - theta^2, positive by construction.
    pub fn discriminant(&self) -> f64 {
        self.disc
    }

    /// Q(xi) = eta xi^2 + theta xi + delta; positive definite since D > 0.
    pub fn q_of_xi(&self, xi: f64) -> f64 {
        self.eta * xi * xi + self.theta * xi + self.delta
    }

    pub fn m_value(&self, p: &Point) -> f64 {
        self.a.iter().enumerate().map(|(i, ai)| ai * p[i]).sum()
    }

    pub fn p_value(&self, p: &Point) -> f64 {
        self.b.iter().enumerate().map(|(j, bj)| bj * p[j]).sum()
    }

    fn check_point(&self, p: &Point) -> Result<f64> {
        if p.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: p.n(),
            });
        }
        let pv = self.p_value(p);
        if pv.abs() <= EPS_SING {
            return Err(Error::singular(format!("hyperplane P(x) = {pv}")));
        }
        Ok(pv)
    }

    pub fn xi_value(&self, p: &Point) -> Result<f64> {
        let pv = self.check_point(p)?;
        Ok(self.m_value(p) / pv)
    }

    /// Closed-form jets:
    /// xi_{,k} = (a_k - b_k xi)/P for k <= m1, -b_k xi / P for m1 < k <= m2,
    /// zero beyond m2; xi_{,ij} = -(b_i xi_{,j} + b_j xi_{,i})/P throughout.
    pub fn xi_jet(&self, p: &Point) -> Result<Jet2> {
        let pv = self.check_point(p)?;
        let n = self.n;
        let xi = self.m_value(p) / pv;
        let ext = |k: usize| -> (f64, f64) {
            let a = if k < self.a.len() { self.a[k] } else { 0.0 };
            let b = if k < self.b.len() { self.b[k] } else { 0.0 };
            (a, b)
        };
        let mut grad = vec![0.0; n];
        for (k, g) in grad.iter_mut().enumerate() {
            let (ak, bk) = ext(k);
            *g = (ak - bk * xi) / pv;
        }
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let (_, bi) = ext(i);
                let (_, bj) = ext(j);
                let v = -(bi * grad[j] + bj * grad[i]) / pv;
                hess[i * n + j] = v;
            }
        }
        Ok(Jet2::from_parts(xi, grad, hess))
    }
}

/// xi = -sum_l lambda_l r_l^{2-n}, the superposed harmonic kernels of the
/// multi-centered family; r_l is the Euclidean distance to center l.
#[derive(Debug, Clone)]
pub struct HarmonicPoleInvariant {
    n: usize,
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    eps_center: f64,
}

impl HarmonicPoleInvariant {
    pub fn new(centers: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::invalid("at least one center is required"));
        }
        let n = centers[0].len();
        if n < 3 {
            return Err(Error::invalid("harmonic-pole invariant needs n >= 3"));
        }
        if centers.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("all centers must share one dimension"));
        }
        if weights.len() != centers.len() {
            return Err(Error::invalid("one weight per center is required"));
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(Error::invalid("at least one weight must be nonzero"));
        }
        for i in 0..centers.len() {
            for j in (i + 1)..centers.len() {
                let d2: f64 = centers[i]
                    .iter()
                    .zip(&centers[j])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                if d2 == 0.0 {
                    return Err(Error::CoincidentCenters(i, j));
                }
            }
        }
        Ok(HarmonicPoleInvariant {
            n,
            centers,
            weights,
            eps_center: EPS_CENTER,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eps_center(&self) -> f64 {
        self.eps_center
    }

    pub fn with_eps_center(mut self, eps: f64) -> Self {
        self.eps_center = eps;
        self
    }

    /// Squared distance to each center.
    fn r2(&self, p: &Point, l: usize) -> f64 {
        self.centers[l]
            .iter()
            .enumerate()
            .map(|(k, c)| (p[k] - c) * (p[k] - c))
            .sum()
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        if p.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: p.n(),
            });
        }
        for l in 0..self.centers.len() {
            if self.r2(p, l).sqrt() <= self.eps_center {
                return Err(Error::singular(format!("within eps of center {l}")));
            }
        }
        Ok(())
    }

    pub fn xi_value(&self, p: &Point) -> Result<f64> {
        self.check_point(p)?;
        let half = (2.0 - self.n as f64) / 2.0;
        let mut xi = 0.0;
        for l in 0..self.centers.len() {
            xi -= self.weights[l] * self.r2(p, l).powf(half);
        }
        Ok(xi)
    }

    /// xi_{,i} = (n-2) sum_l lambda_l r_l^{-n} (x_i - c_l^i);
    /// xi_{,ij} = (n-2) sum_l lambda_l [delta_ij r_l^{-n}
    ///            - n r_l^{-n-2} (x_i - c_l^i)(x_j - c_l^j)].
    /// The trace vanishes identically: each kernel is harmonic away from
    /// its center.
    pub fn xi_jet(&self, p: &Point) -> Result<Jet2> {
        self.check_point(p)?;
        let n = self.n;
        let nf = n as f64;
        let mut value = 0.0;
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        for l in 0..self.centers.len() {
            let lam = self.weights[l];
            let r2 = self.r2(p, l);
            let rm_n = r2.powf(-nf / 2.0); // r^{-n}
            let rm_n2 = rm_n / r2; // r^{-n-2}
            value -= lam * r2.powf((2.0 - nf) / 2.0);
            for i in 0..n {
                let di = p[i] - self.centers[l][i];
                grad[i] += (nf - 2.0) * lam * rm_n * di;
                for j in i..n {
                    let dj = p[j] - self.centers[l][j];
                    let kron = if i == j { rm_n } else { 0.0 };
                    hess[i * n + j] += (nf - 2.0) * lam * (kron - nf * rm_n2 * di * dj);
                }
            }
        }
        Ok(Jet2::from_parts(value, grad, hess))
    }
}

/// One of the three invariant families, boxed for sharing inside fields.
#[derive(Debug, Clone)]
pub enum InvariantField {
    Quadric(Arc<QuadricInvariant>),
    Dilation(Arc<DilationInvariant>),
    Pole(Arc<HarmonicPoleInvariant>),
}

impl InvariantField {
    pub fn n(&self) -> usize {
        match self {
            InvariantField::Quadric(q) => q.n(),
            InvariantField::Dilation(d) => d.n(),
            InvariantField::Pole(h) => h.n(),
        }
    }

    pub fn xi_jet(&self, p: &Point) -> Result<Jet2> {
        match self {
            InvariantField::Quadric(q) => q.xi_jet(p),
            InvariantField::Dilation(d) => d.xi_jet(p),
            InvariantField::Pole(h) => h.xi_jet(p),
        }
    }

    pub fn xi_value(&self, p: &Point) -> Result<f64> {
        match self {
            InvariantField::Quadric(q) => q.xi_value(p),
            InvariantField::Dilation(d) => d.xi_value(p),
            InvariantField::Pole(h) => h.xi_value(p),
        }
    }

    pub fn field(&self) -> ScalarField {
        ScalarField::from_invariant(self.clone())
    }

    /// The separable form of Delta xi / |grad xi|^2 as a function of xi,
    /// when one exists in closed form. A quadric with a non-identity outer
    /// function is reparametrized and yields none.
    pub fn separable_h(&self) -> Option<SeparableH> {
        match self {
            InvariantField::Pole(_) => Some(SeparableH::Zero),
            InvariantField::Dilation(d) => {
                let (eta, theta, delta) = d.quadratic_coefficients();
                Some(SeparableH::DilationRational { eta, theta, delta })
            }
            InvariantField::Quadric(q) => {
                if !q.has_identity_outer() {
                    return None;
                }
                if q.tau() == 0.0 {
                    Some(SeparableH::Zero)
                } else {
                    Some(SeparableH::QuadricRational {
                        n: q.n(),
                        tau: q.tau(),
                        beta: q.beta(),
                    })
                }
            }
        }
    }
}

/// h(xi) = Delta xi / |grad xi|^2 in closed form, together with the
/// canonical antiderivative used to normalize the first integral
/// U' = k exp(-int h).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeparableH {
    /// Harmonic invariants and translation quadrics: h = 0.
    Zero,
    /// Dilation: h = (2 eta xi + theta)/Q(xi); antiderivative ln Q, so
    /// exp(-int h) collapses to 1/Q.
    DilationRational { eta: f64, theta: f64, delta: f64 },
    /// Rotational quadric: h = 2 n tau / s(xi) with s = 4 tau xi + beta;
    /// antiderivative (n/2) ln |s|.
    QuadricRational { n: usize, tau: f64, beta: f64 },
}

impl SeparableH {
    pub fn h(&self, xi: f64) -> Result<f64> {
        match self {
            SeparableH::Zero => Ok(0.0),
            SeparableH::DilationRational { eta, theta, delta } => {
                let q = eta * xi * xi + theta * xi + delta;
                Ok((2.0 * eta * xi + theta) / q)
            }
            SeparableH::QuadricRational { n, tau, beta } => {
                let s = 4.0 * tau * xi + beta;
                if s.abs() <= EPS_SING {
                    return Err(Error::SingularCoefficient(xi));
                }
                Ok(2.0 * (*n as f64) * tau / s)
            }
        }
    }

    /// Closed-form antiderivative of h, fixing the constant of integration
    /// so that exp(-H) matches the closed-form first-integral weight.
    pub fn antiderivative(&self, xi: f64) -> Result<f64> {
        match self {
            SeparableH::Zero => Ok(0.0),
            SeparableH::DilationRational { eta, theta, delta } => {
                Ok((eta * xi * xi + theta * xi + delta).ln())
            }
            SeparableH::QuadricRational { n, tau, beta } => {
                let s = 4.0 * tau * xi + beta;
                if s.abs() <= EPS_SING {
                    return Err(Error::SingularCoefficient(xi));
                }
                Ok(0.5 * (*n as f64) * s.abs().ln())
            }
        }
    }

    /// The anchor at which the tabulated lapse equals k1: the arctan zero
    /// for the dilation family, xi = 0 for harmonic kernels; rotational
    /// quadrics have no canonical choice and anchor at the interval start.
    pub fn default_anchor(&self) -> Option<f64> {
        match self {
            SeparableH::Zero => Some(0.0),
            SeparableH::DilationRational { eta, theta, .. } => Some(-theta / (2.0 * eta)),
            SeparableH::QuadricRational { .. } => None,
        }
    }
}

/// |(2 eta xi + theta)/P^2 - Delta xi| at `p`: the pointwise violation of
/// the fundamental relation (1/P^2) d/dxi (P^2 |grad xi|^2) = Delta xi.
pub fn fundamental_relation_residual(inv: &DilationInvariant, p: &Point) -> Result<f64> {
    let jet = inv.xi_jet(p)?;
    let pv = inv.p_value(p);
    let (eta, theta, _) = inv.quadratic_coefficients();
    let lhs = (2.0 * eta * jet.value + theta) / (pv * pv);
    Ok((lhs - jet.laplacian()).abs())
}

// ---- separability diagnostics --------------------------------------------

/// Where and how the level sets are probed.
#[derive(Debug, Clone)]
pub struct SeparabilityOptions {
    /// Origin of the random rays.
    pub center: Vec<f64>,
    /// Rays are searched over t in (0, ray_radius].
    pub ray_radius: f64,
    pub eps_grad: f64,
    pub tol_sep: f64,
    /// |xi - c| tolerance for accepting a root along a ray.
    pub level_tol: f64,
    /// Pairs (i, j) enter the Hessian-ratio statistic only when
    /// |xi_i xi_j| exceeds this fraction of |grad xi|^2.
    pub pair_threshold: f64,
}

impl SeparabilityOptions {
    pub fn centered_at(center: Vec<f64>, ray_radius: f64) -> Self {
        SeparabilityOptions {
            center,
            ray_radius,
            eps_grad: EPS_GRAD,
            tol_sep: TOL_SEP,
            level_tol: 1e-10,
            pair_threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LevelSpread {
    pub level: f64,
    pub samples: usize,
    /// max - min of Delta xi / |grad xi|^2 over the level set.
    pub laplacian_spread: f64,
    /// Largest per-pair max - min of xi_{,ij}/(xi_{,i} xi_{,j}).
    pub hessian_spread: f64,
}

#[derive(Debug, Clone)]
pub struct SeparabilityReport {
    pub levels: Vec<LevelSpread>,
    /// Delta xi / |grad xi|^2 constant on every probed level set; this is
    /// the condition the lapse ODE reduction needs.
    pub lapse_separable: bool,
    /// Every mixed ratio xi_{,ij}/(xi_{,i} xi_{,j}) constant per pair on
    /// every probed level set.
    pub hessian_separable: bool,
    pub separable: bool,
    pub tol_sep: f64,
}

/// Probes each requested level set of `xi` with points found by bisection
/// along seeded random rays and measures how far the reduction ratios are
/// from being functions of xi alone.
pub fn separability_check(
    xi: &ScalarField,
    level_values: &[f64],
    samples_per_level: usize,
    seed: u64,
    opts: &SeparabilityOptions,
) -> Result<SeparabilityReport> {
    let n = opts.center.len();
    let mut rng = CounterRng::new(seed);
    let mut levels = Vec::with_capacity(level_values.len());

    for &level in level_values {
        let samples = collect_level_samples(xi, level, samples_per_level, &mut rng, opts)?;
        if samples.is_empty() {
            return Err(Error::EmptyLevelSet { level });
        }

        let mut lap_min = f64::INFINITY;
        let mut lap_max = f64::NEG_INFINITY;
        // Per-pair extremes of the mixed-ratio statistic.
        let mut pair_min = vec![f64::INFINITY; n * n];
        let mut pair_max = vec![f64::NEG_INFINITY; n * n];

        for point in &samples {
            let jet = xi.eval_jet(point)?;
            let gnorm2 = jet.grad_norm_sq();
            if gnorm2 <= opts.eps_grad * opts.eps_grad {
                return Err(Error::DegenerateGradient);
            }
            let ratio = jet.laplacian() / gnorm2;
            lap_min = lap_min.min(ratio);
            lap_max = lap_max.max(ratio);
            for i in 0..n {
                for j in (i + 1)..n {
                    let denom = jet.grad_entry(i) * jet.grad_entry(j);
                    if denom.abs() > opts.pair_threshold * gnorm2 {
                        let r = jet.hess_entry(i, j) / denom;
                        let idx = i * n + j;
                        pair_min[idx] = pair_min[idx].min(r);
                        pair_max[idx] = pair_max[idx].max(r);
                    }
                }
            }
        }

        let hessian_spread = (0..n * n)
            .filter(|&idx| pair_max[idx] > f64::NEG_INFINITY)
            .map(|idx| pair_max[idx] - pair_min[idx])
            .fold(0.0_f64, f64::max);

        levels.push(LevelSpread {
            level,
            samples: samples.len(),
            laplacian_spread: lap_max - lap_min,
            hessian_spread,
        });
    }

    let lapse_separable = levels.iter().all(|l| l.laplacian_spread <= opts.tol_sep);
    let hessian_separable = levels.iter().all(|l| l.hessian_spread <= opts.tol_sep);
    Ok(SeparabilityReport {
        levels,
        lapse_separable,
        hessian_separable,
        separable: lapse_separable && hessian_separable,
        tol_sep: opts.tol_sep,
    })
}

fn collect_level_samples(
    xi: &ScalarField,
    level: f64,
    wanted: usize,
    rng: &mut CounterRng,
    opts: &SeparabilityOptions,
) -> Result<Vec<Point>> {
    let n = opts.center.len();
    let max_attempts = wanted.max(1) * 64;
    let mut found = Vec::with_capacity(wanted);

    for _ in 0..max_attempts {
        if found.len() >= wanted {
            break;
        }
        let dir = rng.unit_direction(n);
        let at = |t: f64| -> Option<(Point, f64)> {
            let coords: Vec<f64> = opts
                .center
                .iter()
                .zip(&dir)
                .map(|(c, d)| c + t * d)
                .collect();
            let p = Point::new(coords).ok()?;
            let v = xi.eval_value(&p).ok()?;
            Some((p, v - level))
        };

        // Bracket a strict sign change along the ray (the scan starts off
        // the center so a level set through the center itself does not
        // produce a spurious root at t = 0), then bisect to interval
        // exhaustion; level_tol only gates final acceptance.
        const SCAN: usize = 64;
        let dt = opts.ray_radius / SCAN as f64;
        let mut prev: Option<(f64, f64)> = None;
        let mut bracket = None;
        for s in 1..=SCAN {
            let t = (s as f64) * dt;
            if let Some((_, g)) = at(t) {
                if let Some((tp, gp)) = prev {
                    if gp * g < 0.0 {
                        bracket = Some((tp, gp, t));
                        break;
                    }
                }
                prev = Some((t, g));
            } else {
                prev = None;
            }
        }
        let Some((mut lo, mut glo, mut hi)) = bracket else {
            continue;
        };
        for _ in 0..200 {
            if hi - lo <= 1e-16 * (1.0 + hi.abs()) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let Some((_, gm)) = at(mid) else { break };
            if glo * gm <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
                glo = gm;
            }
        }
        let t_root = 0.5 * (lo + hi);
        if let Some((p, g)) = at(t_root) {
            if g.abs() <= opts.level_tol * (1.0 + level.abs()) {
                found.push(p);
            }
        }
    }
    Ok(found)
}
