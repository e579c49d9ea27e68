//! Adaptive Gauss-Kronrod quadrature (7-15 pair, bisection refinement).

use crate::error::{Error, Result};

// Abscissae and weights of the 15-point Kronrod rule with embedded 7-point
// Gauss rule, positive half; node 7 is the midpoint. Full published digits
// are kept even where they exceed f64 resolution.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod panel: returns (kronrod, |kronrod - gauss|).
fn panel<F>(f: &F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let c = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (idx, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let f1 = f(c - dx)?;
        let f2 = f(c + dx)?;
        kronrod += WGK[idx] * (f1 + f2);
        if idx % 2 == 1 {
            gauss += WG[idx / 2] * (f1 + f2);
        }
    }
    kronrod *= half;
    gauss *= half;
    Ok((kronrod, (kronrod - gauss).abs()))
}

fn refine<F>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (value, err) = panel(f, a, b)?;
    if err <= tol || err <= 1e-16 * (1.0 + value.abs()) {
        return Ok(value);
    }
    if depth == 0 {
        return Err(Error::QuadratureFailure { a, b, tol });
    }
    let mid = 0.5 * (a + b);
    Ok(refine(f, a, mid, 0.5 * tol, depth - 1)? + refine(f, mid, b, 0.5 * tol, depth - 1)?)
}

/// Integral of `f` over [a, b] to absolute tolerance `abs_tol`. Handles
/// a > b by orientation. The integrand may refuse evaluation; the refusal
/// propagates.
pub fn integrate<F>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, flip) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    Ok(flip * refine(&f, lo, hi, abs_tol, 48)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn polynomial_is_near_exact() {
        let v = integrate(|t| Ok(t * t * t - 2.0 * t + 1.0), -1.0, 3.0, 1e-13).unwrap();
        // antiderivative t^4/4 - t^2 + t
        let exact = (81.0 / 4.0 - 9.0 + 3.0) - (0.25 - 1.0 - 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn worked_rational_integral() {
        // int_0^1 dxi/(2 xi^2 - 2 xi + 1) = pi/2.
        let v = integrate(|t| Ok(1.0 / (2.0 * t * t - 2.0 * t + 1.0)), 0.0, 1.0, 1e-13).unwrap();
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn rational_matches_arctangent_antiderivative() {
        // int 1/(eta t^2 + theta t + delta) = (2/sqrt(D)) atan((2 eta t + theta)/sqrt(D)).
        let mut rng = CounterRng::new(100);
        for _ in 0..20 {
            let eta = rng.uniform(0.3, 4.0);
            let delta = rng.uniform(0.3, 4.0);
            // Pick theta below the Cauchy-Schwarz bound so D > 0.
            let theta = rng.uniform(-1.0, 1.0) * 1.9 * (eta * delta).sqrt();
            let d = 4.0 * eta * delta - theta * theta;
            assert!(d > 0.0);
            let root = d.sqrt();
            let (a, b) = (-5.0, 5.0);
            let num =
                integrate(|t| Ok(1.0 / (eta * t * t + theta * t + delta)), a, b, 1e-12).unwrap();
            let anti = |t: f64| (2.0 / root) * ((2.0 * eta * t + theta) / root).atan();
            let exact = anti(b) - anti(a);
            assert!((num - exact).abs() <= 1e-10, "{num} vs {exact}");
        }
    }

    #[test]
    fn orientation_flip() {
        let forward = integrate(|t| Ok(t.exp()), 0.0, 1.0, 1e-12).unwrap();
        let backward = integrate(|t| Ok(t.exp()), 1.0, 0.0, 1e-12).unwrap();
        assert!((forward + backward).abs() < 1e-14);
    }

    #[test]
    fn integrand_refusal_propagates() {
        let r = integrate(|_t| Err(Error::SingularCoefficient(0.0)), 0.0, 1.0, 1e-10);
        assert!(matches!(r, Err(Error::SingularCoefficient(_))));
    }
}
