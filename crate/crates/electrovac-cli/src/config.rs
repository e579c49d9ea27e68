//! Config file schema and construction of library objects from it.
//!
//! Unknown keys are rejected everywhere; defaults are materialized on
//! parse so that the embedded copy in a report is fully resolved.

use electrovac::defaults::{EPS_CENTER, HYPERPLANE_MARGIN};
use electrovac::error::Error;
use electrovac::harness::{Region, ResidualReport, Tolerances};
use electrovac::invariants::{
    DilationInvariant, HarmonicPoleInvariant, InvariantField, QuadricInvariant,
};
use electrovac::residuals::SystemInstance;
use electrovac::solutions::{DilationMp, MultiCenterMp};
use electrovac::ScalarField;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

fn default_sign() -> i8 {
    1
}

fn default_points() -> usize {
    1000
}

/// A solution family and its parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolutionConfig {
    Minkowski {
        n: usize,
        #[serde(default)]
        lambda: Option<f64>,
    },
    Multicenter {
        n: usize,
        centers: Vec<Vec<f64>>,
        weights: Vec<f64>,
        k: f64,
        k1: f64,
        #[serde(default = "default_sign")]
        sign: i8,
        /// Overrides the family's Lambda = 0 (used by corruption probes).
        #[serde(default)]
        lambda: Option<f64>,
    },
    Dilation {
        n: usize,
        a: Vec<f64>,
        b: Vec<f64>,
        k: f64,
        k1: f64,
        #[serde(default = "default_sign")]
        sign: i8,
        #[serde(default)]
        lambda: Option<f64>,
    },
}

impl SolutionConfig {
    pub fn n(&self) -> usize {
        match self {
            SolutionConfig::Minkowski { n, .. }
            | SolutionConfig::Multicenter { n, .. }
            | SolutionConfig::Dilation { n, .. } => *n,
        }
    }

    /// Fill in defaults so the serialized form is fully resolved.
    pub fn resolved(&self) -> SolutionConfig {
        let mut c = self.clone();
        match &mut c {
            SolutionConfig::Minkowski { lambda, .. }
            | SolutionConfig::Multicenter { lambda, .. }
            | SolutionConfig::Dilation { lambda, .. } => {
                if lambda.is_none() {
                    *lambda = Some(0.0);
                }
            }
        }
        c
    }

    pub fn build_system(&self) -> Result<SystemInstance, Error> {
        let sys = match self {
            SolutionConfig::Minkowski { n, .. } => SystemInstance::minkowski(*n),
            SolutionConfig::Multicenter {
                n,
                centers,
                weights,
                k,
                k1,
                sign,
                ..
            } => MultiCenterMp::new(*n, centers.clone(), weights.clone(), *k, *k1, *sign)?
                .system()?,
            SolutionConfig::Dilation {
                n,
                a,
                b,
                k,
                k1,
                sign,
                ..
            } => {
                let inv = DilationInvariant::new(*n, a.clone(), b.clone())?;
                DilationMp::new(inv, *k, *k1, *sign)?.system()?
            }
        };
        let lambda = match self {
            SolutionConfig::Minkowski { lambda, .. }
            | SolutionConfig::Multicenter { lambda, .. }
            | SolutionConfig::Dilation { lambda, .. } => lambda.unwrap_or(0.0),
        };
        Ok(sys.with_lambda(lambda))
    }

    /// The U = 1/N field of the family, used by positivity predicates.
    pub fn u_field(&self) -> Result<Option<ScalarField>, Error> {
        Ok(match self {
            SolutionConfig::Minkowski { .. } => None,
            SolutionConfig::Multicenter {
                n,
                centers,
                weights,
                k,
                k1,
                sign,
                ..
            } => Some(
                MultiCenterMp::new(*n, centers.clone(), weights.clone(), *k, *k1, *sign)?.u_field(),
            ),
            SolutionConfig::Dilation {
                n,
                a,
                b,
                k,
                k1,
                sign,
                ..
            } => {
                let inv = DilationInvariant::new(*n, a.clone(), b.clone())?;
                Some(DilationMp::new(inv, *k, *k1, *sign)?.u_field())
            }
        })
    }
}

/// The sampling box plus exclusion parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default)]
    pub center_exclusion_radius: Option<f64>,
    #[serde(default)]
    pub hyperplane_margin: Option<f64>,
}

impl RegionConfig {
    pub fn resolved(&self) -> RegionConfig {
        RegionConfig {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            center_exclusion_radius: Some(self.center_exclusion_radius.unwrap_or(EPS_CENTER)),
            hyperplane_margin: Some(self.hyperplane_margin.unwrap_or(HYPERPLANE_MARGIN)),
        }
    }

    /// Assemble the region with the exclusions the solution family needs:
    /// balls around centers, the P = 0 hyperplane margin, and lapse
    /// positivity.
    pub fn build(&self, solution: &SolutionConfig) -> Result<Region, Error> {
        let mut region = Region::new_box(self.lo.clone(), self.hi.clone())?;
        let radius = self.center_exclusion_radius.unwrap_or(EPS_CENTER);
        let margin = self.hyperplane_margin.unwrap_or(HYPERPLANE_MARGIN);
        match solution {
            SolutionConfig::Minkowski { .. } => {}
            SolutionConfig::Multicenter { centers, .. } => {
                for c in centers {
                    region = region.exclude_ball(c.clone(), radius)?;
                }
            }
            SolutionConfig::Dilation { n, b, .. } => {
                let mut coeffs = vec![0.0; *n];
                coeffs[..b.len()].copy_from_slice(b);
                region = region.exclude_hyperplane(coeffs, margin)?;
            }
        }
        if let Some(u) = solution.u_field()? {
            region = region.require_positive(u, "nonpositive_lapse");
        }
        Ok(region)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub report: Option<String>,
    #[serde(default)]
    pub csv: Option<String>,
}

/// Top-level config for `verify` and `bounds`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub solution: SolutionConfig,
    pub region: RegionConfig,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn tolerances(&self) -> Result<Tolerances, Error> {
        let mut tols = Tolerances::default();
        for (k, v) in &self.tolerances {
            tols.set(k, *v)?;
        }
        Ok(tols)
    }

    /// Rebuild the run from an emitted report: the embedded solution,
    /// region, seed, point count, and channel tolerances are the fully
    /// resolved config of the original run.
    pub fn from_report(report: &ResidualReport) -> Result<RunConfig, Error> {
        let solution: SolutionConfig = serde_json::from_value(report.solution.clone())
            .map_err(|e| Error::InvalidParameter(format!("report.solution: {e}")))?;
        let mut center_radius = None;
        let mut margin = None;
        for ex in &report.region.exclusions {
            match ex {
                electrovac::harness::ExclusionDescriptor::Ball { radius, .. } => {
                    center_radius = Some(*radius);
                }
                electrovac::harness::ExclusionDescriptor::HyperplaneMargin {
                    margin: m, ..
                } => margin = Some(*m),
                _ => {}
            }
        }
        let tolerances = report
            .channels
            .iter()
            .map(|(k, v)| (k.clone(), v.tolerance))
            .collect();
        Ok(RunConfig {
            solution,
            region: RegionConfig {
                lo: report.region.lo.clone(),
                hi: report.region.hi.clone(),
                center_exclusion_radius: center_radius,
                hyperplane_margin: margin,
            },
            points: report.points.accepted as usize,
            seed: report.seed,
            tolerances,
            output: OutputConfig::default(),
        })
    }
}

// ---- reduce -----------------------------------------------------------------

/// An invariant described in a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InvariantConfig {
    Dilation {
        n: usize,
        a: Vec<f64>,
        b: Vec<f64>,
    },
    Pole {
        centers: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    Quadric {
        n: usize,
        tau: f64,
        gamma: Vec<f64>,
        theta: Vec<f64>,
    },
    /// A sum of coordinate monomials coeff * x_axis^power (diagnostics
    /// only; e.g. the non-separable x1 + x2^3 probe).
    Monomials {
        n: usize,
        terms: Vec<MonomialTerm>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialTerm {
    pub axis: usize,
    pub power: i32,
    pub coeff: f64,
}

impl InvariantConfig {
    /// The closed-form invariant, when this config describes one.
    pub fn build_invariant(&self) -> Result<Option<InvariantField>, Error> {
        Ok(match self {
            InvariantConfig::Dilation { n, a, b } => Some(InvariantField::Dilation(
                DilationInvariant::new(*n, a.clone(), b.clone())?.into(),
            )),
            InvariantConfig::Pole { centers, weights } => Some(InvariantField::Pole(
                HarmonicPoleInvariant::new(centers.clone(), weights.clone())?.into(),
            )),
            InvariantConfig::Quadric {
                tau, gamma, theta, ..
            } => Some(InvariantField::Quadric(
                QuadricInvariant::new(*tau, gamma.clone(), theta.clone(), None)?.into(),
            )),
            InvariantConfig::Monomials { .. } => None,
        })
    }

    /// The invariant as a plain scalar field (always possible).
    pub fn build_field(&self) -> Result<ScalarField, Error> {
        if let Some(inv) = self.build_invariant()? {
            return Ok(inv.field());
        }
        let InvariantConfig::Monomials { terms, .. } = self else {
            unreachable!("non-monomial configs build invariants");
        };
        let mut f = ScalarField::constant(0.0);
        for t in terms {
            f = f + ScalarField::coordinate(t.axis).powi(t.power).scale(t.coeff);
        }
        Ok(f)
    }
}

/// Initial data for the quadric reduced system.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuadricInitialConfig {
    /// Class data from an affine U = a xi + c.
    MpAffine { xi: f64, a: f64, c: f64 },
    /// Explicit state; the constraint is checked at the precondition.
    Explicit {
        xi: f64,
        phi: f64,
        dphi: f64,
        lapse: f64,
        dlapse: f64,
        psi: f64,
        dpsi: f64,
    },
    /// Explicit but with psi' solved from the constraint.
    SolvePsiSlope {
        xi: f64,
        phi: f64,
        dphi: f64,
        lapse: f64,
        dlapse: f64,
        psi: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReduceConfig {
    /// Solve the lapse ODE along a separable invariant.
    LapseProfile {
        invariant: InvariantConfig,
        k: f64,
        k1: f64,
        interval: [f64; 2],
        #[serde(default)]
        knots: Option<usize>,
    },
    /// Integrate the quadric reduced system.
    QuadricSystem {
        n: usize,
        tau: f64,
        gamma: Vec<f64>,
        theta: Vec<f64>,
        #[serde(default)]
        lambda: f64,
        initial: QuadricInitialConfig,
        xi_end: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceRunConfig {
    pub reduce: ReduceConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Top-level config for `bounds`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsRunConfig {
    pub solution: SolutionConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

// ---- separability ------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparabilityRunConfig {
    pub xi: InvariantConfig,
    pub levels: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples_per_level: usize,
    #[serde(default)]
    pub seed: u64,
    pub center: Vec<f64>,
    pub ray_radius: f64,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_samples() -> usize {
    64
}
