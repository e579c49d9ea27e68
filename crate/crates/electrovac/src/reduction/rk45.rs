//! Dormand-Prince 5(4) embedded pair with PI-free step control.

use crate::error::{Error, Result};

/// Right-hand side of a first-order system y' = f(x, y); may refuse
/// evaluation (singular coefficients, domain exits).
pub trait Rhs {
    fn eval(&self, x: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

impl<F> Rhs for F
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn eval(&self, x: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self(x, y, dy)
    }
}

#[derive(Debug, Clone)]
pub struct RkOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Hard cap on the step magnitude; combined with any positional cap.
    pub h_max: f64,
}

impl Default for RkOptions {
    fn default() -> Self {
        RkOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 1_000_000,
            h_max: f64::INFINITY,
        }
    }
}

// Butcher tableau of DOPRI5.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive integrator state; step repeatedly with [`Self::advance_to`].
pub struct AdaptiveRk<'a, R: Rhs + ?Sized> {
    rhs: &'a R,
    pub x: f64,
    pub y: Vec<f64>,
    h: f64,
    opts: RkOptions,
    /// Optional positional step cap, e.g. a fraction of the distance to a
    /// coefficient singularity.
    h_cap: Option<&'a dyn Fn(f64) -> f64>,
}

impl<'a, R: Rhs + ?Sized> AdaptiveRk<'a, R> {
    pub fn new(rhs: &'a R, x0: f64, y0: Vec<f64>, opts: RkOptions) -> Self {
        AdaptiveRk {
            rhs,
            x: x0,
            y: y0,
            h: 0.0,
            opts,
            h_cap: None,
        }
    }

    pub fn with_step_cap(mut self, cap: &'a dyn Fn(f64) -> f64) -> Self {
        self.h_cap = Some(cap);
        self
    }

    fn cap(&self, x: f64, remaining: f64) -> f64 {
        let mut cap = self.opts.h_max.min(remaining);
        if let Some(f) = self.h_cap {
            cap = cap.min(f(x).abs().max(1e-12));
        }
        cap
    }

    /// Integrate until x reaches `x_target` exactly (either direction).
    pub fn advance_to(&mut self, x_target: f64) -> Result<()> {
        let dir = (x_target - self.x).signum();
        if dir == 0.0 {
            return Ok(());
        }
        let dim = self.y.len();
        let mut k = vec![vec![0.0; dim]; 7];
        if self.h == 0.0 {
            self.h = 1e-4 * (x_target - self.x).abs().max(1e-3);
        }
        let mut steps = 0usize;
        while (x_target - self.x) * dir > 0.0 {
            steps += 1;
            if steps > self.opts.max_steps {
                return Err(Error::StepFailure(self.x));
            }
            let remaining = (x_target - self.x).abs();
            let h = self.h.min(self.cap(self.x, remaining)).max(1e-14);
            let h_signed = dir * h;

            self.rhs.eval(self.x, &self.y, &mut k[0])?;
            let mut ytmp = vec![0.0; dim];
            for stage in 0..6 {
                for i in 0..dim {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(stage + 1) {
                        acc += A[stage][j] * kj[i];
                    }
                    ytmp[i] = self.y[i] + h_signed * acc;
                }
                self.rhs
                    .eval(self.x + h_signed * stage_c(stage), &ytmp, &mut k[stage + 1])?;
            }
            // 5th-order solution is the last stage argument (FSAL form).
            let y5 = ytmp.clone();
            // Embedded 4th-order estimate.
            let mut err_norm = 0.0;
            for i in 0..dim {
                let mut acc4 = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    acc4 += B4[j] * kj[i];
                }
                let y4 = self.y[i] + h_signed * acc4;
                let scale = self.opts.atol + self.opts.rtol * self.y[i].abs().max(y5[i].abs());
                let e = (y5[i] - y4) / scale;
                err_norm += e * e;
            }
            err_norm = (err_norm / dim as f64).sqrt();

            if err_norm <= 1.0 {
                self.x += h_signed;
                self.y = y5;
                let grow = 0.9 * err_norm.max(1e-10).powf(-0.2);
                self.h = (h * grow.clamp(0.2, 5.0)).max(1e-14);
            } else {
                let shrink = 0.9 * err_norm.powf(-0.2);
                let new_h = h * shrink.clamp(0.1, 0.9);
                if new_h < 1e-13 * (1.0 + self.x.abs()) {
                    return Err(Error::StepFailure(self.x));
                }
                self.h = new_h;
            }
        }
        Ok(())
    }
}

fn stage_c(stage: usize) -> f64 {
    // Nodes c_2..c_7 of the tableau.
    [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0][stage]
}
