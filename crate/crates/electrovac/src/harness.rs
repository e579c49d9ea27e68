//! Domain construction, seeded sampling, residual aggregation, and report
//! generation.
//!
//! Sampling is rejection sampling from an axis-aligned box against declared
//! exclusion predicates, driven by a counter-based generator: identical
//! (region, count, seed) inputs reproduce the identical point set bit for
//! bit. Point evaluation may run on several threads; aggregation walks the
//! results in draw order with compensated summation, so reports do not
//! depend on the thread count.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::jet::Point;
use crate::residuals::{residual_sample, ResidualVector, SystemInstance, CHANNEL_NAMES};
use crate::rng::CounterRng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A predicate that removes part of the sampling box.
#[derive(Debug, Clone)]
pub enum Exclusion {
    /// Reject points within `radius` of `center`.
    Ball { center: Vec<f64>, radius: f64 },
    /// Reject points with |coeffs . x| < margin * (1 + |x|).
    HyperplaneMargin { coeffs: Vec<f64>, margin: f64 },
    /// Reject points where the field is non-positive or refuses evaluation.
    PositiveField { field: ScalarField, label: String },
    /// Reject points where the field leaves [lo, hi] or refuses evaluation.
    FieldRange {
        field: ScalarField,
        lo: f64,
        hi: f64,
        label: String,
    },
}

impl Exclusion {
    /// None if the point is admissible, otherwise the rejection label.
    fn rejects(&self, p: &Point) -> Option<String> {
        match self {
            Exclusion::Ball { center, radius } => {
                let d2: f64 = center
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (p[i] - c) * (p[i] - c))
                    .sum();
                (d2.sqrt() < *radius).then(|| "center_ball".to_string())
            }
            Exclusion::HyperplaneMargin { coeffs, margin } => {
                let v: f64 = coeffs.iter().enumerate().map(|(i, c)| c * p[i]).sum();
                (v.abs() < margin * (1.0 + p.norm())).then(|| "hyperplane_margin".to_string())
            }
            Exclusion::PositiveField { field, label } => match field.eval_value(p) {
                Ok(v) if v > 0.0 => None,
                _ => Some(label.clone()),
            },
            Exclusion::FieldRange {
                field,
                lo,
                hi,
                label,
            } => match field.eval_value(p) {
                Ok(v) if v >= *lo && v <= *hi => None,
                _ => Some(label.clone()),
            },
        }
    }

    fn descriptor(&self) -> ExclusionDescriptor {
        match self {
            Exclusion::Ball { center, radius } => ExclusionDescriptor::Ball {
                center: center.clone(),
                radius: *radius,
            },
            Exclusion::HyperplaneMargin { coeffs, margin } => {
                ExclusionDescriptor::HyperplaneMargin {
                    coeffs: coeffs.clone(),
                    margin: *margin,
                }
            }
            Exclusion::PositiveField { label, .. } => ExclusionDescriptor::Positivity {
                label: label.clone(),
            },
            Exclusion::FieldRange { lo, hi, label, .. } => ExclusionDescriptor::Range {
                label: label.clone(),
                lo: *lo,
                hi: *hi,
            },
        }
    }
}

/// An axis-aligned box with exclusion predicates.
#[derive(Debug, Clone)]
pub struct Region {
    lo: Vec<f64>,
    hi: Vec<f64>,
    exclusions: Vec<Exclusion>,
}

impl Region {
    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() < 3 {
            return Err(Error::invalid("box needs matching lo/hi with n >= 3"));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| a.is_nan() || b.is_nan() || a >= b)
        {
            return Err(Error::invalid("box is empty on some axis"));
        }
        Ok(Region {
            lo,
            hi,
            exclusions: Vec::new(),
        })
    }

    /// A centered cube [-half, half]^n.
    pub fn cube(n: usize, half: f64) -> Result<Self> {
        Region::new_box(vec![-half; n], vec![half; n])
    }

    pub fn n(&self) -> usize {
        self.lo.len()
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    pub fn exclude_ball(mut self, center: Vec<f64>, radius: f64) -> Result<Self> {
        if radius.is_nan() || radius <= 0.0 {
            return Err(Error::invalid("exclusion radius must be positive"));
        }
        self.exclusions.push(Exclusion::Ball { center, radius });
        Ok(self)
    }

    pub fn exclude_hyperplane(mut self, coeffs: Vec<f64>, margin: f64) -> Result<Self> {
        if margin.is_nan() || margin <= 0.0 {
            return Err(Error::invalid("hyperplane margin must be positive"));
        }
        self.exclusions
            .push(Exclusion::HyperplaneMargin { coeffs, margin });
        Ok(self)
    }

    pub fn require_positive(mut self, field: ScalarField, label: impl Into<String>) -> Self {
        self.exclusions.push(Exclusion::PositiveField {
            field,
            label: label.into(),
        });
        self
    }

    pub fn require_range(
        mut self,
        field: ScalarField,
        lo: f64,
        hi: f64,
        label: impl Into<String>,
    ) -> Self {
        self.exclusions.push(Exclusion::FieldRange {
            field,
            lo,
            hi,
            label: label.into(),
        });
        self
    }

    fn rejection(&self, p: &Point) -> Option<String> {
        self.exclusions.iter().find_map(|e| e.rejects(p))
    }

    pub fn descriptor(&self) -> RegionDescriptor {
        RegionDescriptor {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            exclusions: self.exclusions.iter().map(|e| e.descriptor()).collect(),
        }
    }
}

/// Serializable face of a region, embedded in reports.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RegionDescriptor {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub exclusions: Vec<ExclusionDescriptor>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExclusionDescriptor {
    Ball { center: Vec<f64>, radius: f64 },
    HyperplaneMargin { coeffs: Vec<f64>, margin: f64 },
    Positivity { label: String },
    Range { label: String, lo: f64, hi: f64 },
}

/// Sampling bookkeeping: candidates drawn, accepted, and per-reason
/// rejection counts. The identity drawn = accepted + sum(rejections) holds.
#[derive(Debug, Clone, Default)]
pub struct SampleStats {
    pub drawn: u64,
    pub accepted: u64,
    pub rejections: BTreeMap<String, u64>,
}

impl SampleStats {
    fn reject(&mut self, reason: String) {
        *self.rejections.entry(reason).or_insert(0) += 1;
    }
}

/// Exactly `count` points uniform on the box conditioned on every
/// predicate, deterministic for a fixed seed. Gives up once candidates
/// exceed 100x the requested count.
pub fn sample_domain(region: &Region, count: usize, seed: u64) -> Result<Vec<Point>> {
    Ok(sample_domain_with_stats(region, count, seed)?.0)
}

pub fn sample_domain_with_stats(
    region: &Region,
    count: usize,
    seed: u64,
) -> Result<(Vec<Point>, SampleStats)> {
    let n = region.n();
    let mut rng = CounterRng::new(seed);
    let mut stats = SampleStats::default();
    let mut points = Vec::with_capacity(count);
    let budget = (count as u64).saturating_mul(100).max(100);

    while points.len() < count {
        if stats.drawn >= budget {
            return Err(Error::EmptyRegion {
                drawn: stats.drawn,
                accepted: stats.accepted,
            });
        }
        stats.drawn += 1;
        let coords: Vec<f64> = (0..n)
            .map(|i| rng.uniform(region.lo[i], region.hi[i]))
            .collect();
        let p = Point::new(coords)?;
        match region.rejection(&p) {
            Some(reason) => stats.reject(reason),
            None => {
                stats.accepted += 1;
                points.push(p);
            }
        }
    }
    Ok((points, stats))
}

// ---- verification -----------------------------------------------------------

/// Per-channel acceptance thresholds on the normalized residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances(BTreeMap<String, f64>);

impl Default for Tolerances {
    /// 1e-8 for scalar channels; 1e-7 for the tensor channels built from
    /// second derivatives, which lose about one digit.
    fn default() -> Self {
        let mut m = BTreeMap::new();
        for name in CHANNEL_NAMES {
            let tol = match name {
                "hessian_max" | "t1_offdiag" | "t1_diag" => 1e-7,
                _ => 1e-8,
            };
            m.insert(name.to_string(), tol);
        }
        Tolerances(m)
    }
}

impl Tolerances {
    /// The same threshold on all nine channels.
    pub fn uniform(tol: f64) -> Self {
        let mut m = BTreeMap::new();
        for name in CHANNEL_NAMES {
            m.insert(name.to_string(), tol);
        }
        Tolerances(m)
    }

    pub fn set(&mut self, channel: &str, tol: f64) -> Result<()> {
        if !CHANNEL_NAMES.contains(&channel) {
            return Err(Error::invalid(format!("unknown channel '{channel}'")));
        }
        self.0.insert(channel.to_string(), tol);
        Ok(())
    }

    pub fn get(&self, channel: &str) -> f64 {
        *self.0.get(channel).expect("all channels populated")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChannelStats {
    pub max: f64,
    pub mean: f64,
    pub p95: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PointsSummary {
    pub requested: u64,
    pub accepted: u64,
    pub rejections: BTreeMap<String, u64>,
}

/// The verification report; serializes with a fixed key order so that
/// identical (config, seed) runs produce byte-identical JSON except for
/// the timestamp.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    pub schema_version: u32,
    pub solution: serde_json::Value,
    pub region: RegionDescriptor,
    pub seed: u64,
    pub channels: BTreeMap<String, ChannelStats>,
    pub points: PointsSummary,
    pub verdict: String,
    pub timestamp: u64,
}

impl ResidualReport {
    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }

    /// JSON with the timestamp cleared, for bitwise comparisons.
    pub fn json_without_timestamp(&self) -> String {
        let mut clone = self.clone();
        clone.timestamp = 0;
        serde_json::to_string_pretty(&clone).expect("report serializes")
    }
}

/// Report plus the raw per-point data behind it.
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub report: ResidualReport,
    pub points: Vec<Point>,
    /// Normalized residual vectors, in point order.
    pub samples: Vec<ResidualVector>,
}

/// Evaluate all nine residual channels at `count` sampled points and
/// aggregate. Per-point evaluation failures are tolerated up to a 1%
/// budget and reported as rejections.
pub fn verify(
    sys: &SystemInstance,
    region: &Region,
    count: usize,
    tolerances: &Tolerances,
    seed: u64,
    solution: serde_json::Value,
) -> Result<VerifyOutcome> {
    let (candidates, mut stats) = sample_domain_with_stats(region, count, seed)?;

    let evaluated: Vec<Result<crate::residuals::ResidualSample>> =
        parallel_map(&candidates, |p| residual_sample(sys, p));

    let mut points = Vec::with_capacity(count);
    let mut samples = Vec::with_capacity(count);
    let mut failures = 0u64;
    for (p, r) in candidates.into_iter().zip(evaluated) {
        match r {
            Ok(s) => {
                points.push(p);
                samples.push(s.normalized);
            }
            Err(_) => failures += 1,
        }
    }
    if failures > 0 {
        stats.accepted -= failures;
        stats.reject_n("evaluation_failure", failures);
        if failures * 100 > count as u64 {
            return Err(Error::domain(format!(
                "evaluation failures ({failures}) exceed 1% of {count} points"
            )));
        }
    }

    let mut channels = BTreeMap::new();
    let mut pass = true;
    for (idx, name) in CHANNEL_NAMES.iter().enumerate() {
        let values: Vec<f64> = samples.iter().map(|s| s.as_array()[idx]).collect();
        let tol = tolerances.get(name);
        let stats_c = aggregate(&values, tol);
        pass &= stats_c.max <= tol;
        channels.insert(name.to_string(), stats_c);
    }

    let report = ResidualReport {
        schema_version: 1,
        solution,
        region: region.descriptor(),
        seed,
        channels,
        points: PointsSummary {
            requested: stats.drawn,
            accepted: stats.accepted,
            rejections: stats.rejections.clone(),
        },
        verdict: if pass { "pass" } else { "fail" }.to_string(),
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    Ok(VerifyOutcome {
        report,
        points,
        samples,
    })
}

impl SampleStats {
    fn reject_n(&mut self, reason: &str, n: u64) {
        *self.rejections.entry(reason.to_string()).or_insert(0) += n;
    }
}

fn aggregate(values: &[f64], tolerance: f64) -> ChannelStats {
    if values.is_empty() {
        return ChannelStats {
            max: 0.0,
            mean: 0.0,
            p95: 0.0,
            tolerance,
        };
    }
    let max = values.iter().fold(0.0_f64, |m, v| m.max(*v));
    // Neumaier-compensated mean keeps the result order-insensitive to
    // 1-ulp scale.
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    let mean = (sum + comp) / values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite residuals"));
    let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let p95 = sorted[rank - 1];
    ChannelStats {
        max,
        mean,
        p95,
        tolerance,
    }
}

/// Points-and-residuals CSV: `x1,..,xn,lapse,...` with normalized values.
pub fn points_csv(outcome: &VerifyOutcome, n: usize) -> String {
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.extend(CHANNEL_NAMES.iter().map(|s| s.to_string()));
    let mut out = header.join(",");
    out.push('\n');
    for (p, s) in outcome.points.iter().zip(&outcome.samples) {
        let mut row: Vec<String> = p.coords().iter().map(|c| format!("{c}")).collect();
        row.extend(s.as_array().iter().map(|v| format!("{v}")));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Order-preserving parallel map; thread count from ELECTROVAC_THREADS
/// (0 or unset = available parallelism). Results do not depend on the
/// thread count.
pub fn parallel_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    let threads = thread_count().min(items.len().max(1));
    if threads <= 1 {
        return items.iter().map(&f).collect();
    }
    let mut slots: Vec<Option<U>> = Vec::with_capacity(items.len());
    slots.resize_with(items.len(), || None);
    let chunk = items.len().div_ceil(threads);
    let f = &f;
    std::thread::scope(|scope| {
        for (slot_chunk, item_chunk) in slots.chunks_mut(chunk).zip(items.chunks(chunk)) {
            scope.spawn(move || {
                for (slot, item) in slot_chunk.iter_mut().zip(item_chunk) {
                    *slot = Some(f(item));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("slot filled")).collect()
}

fn thread_count() -> usize {
    match std::env::var("ELECTROVAC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        Some(0) | None => std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1),
        Some(k) => k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solutions::MultiCenterMp;

    #[test]
    fn sampling_respects_predicates_and_is_reproducible() {
        let region = Region::cube(3, 2.0)
            .unwrap()
            .exclude_ball(vec![0.0; 3], 0.1)
            .unwrap();
        let a = sample_domain(&region, 1000, 7).unwrap();
        let b = sample_domain(&region, 1000, 7).unwrap();
        assert_eq!(a.len(), 1000);
        assert_eq!(a, b);
        for p in &a {
            assert!(p.norm() >= 0.1);
            for i in 0..3 {
                assert!(p[i] >= -2.0 && p[i] < 2.0);
            }
        }
        let c = sample_domain(&region, 1000, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn hyperplane_margin_is_enforced() {
        let region = Region::cube(3, 2.0)
            .unwrap()
            .exclude_hyperplane(vec![1.0, 1.0, 0.0], 0.05)
            .unwrap();
        for p in sample_domain(&region, 500, 3).unwrap() {
            let v = (p[0] + p[1]).abs();
            assert!(v >= 0.05 * (1.0 + p.norm()));
        }
    }

    #[test]
    fn rejection_accounting_balances() {
        let region = Region::cube(3, 1.0)
            .unwrap()
            .exclude_ball(vec![0.0; 3], 0.8)
            .unwrap();
        let (_, stats) = sample_domain_with_stats(&region, 200, 11).unwrap();
        let rejected: u64 = stats.rejections.values().sum();
        assert_eq!(stats.drawn, stats.accepted + rejected);
    }

    #[test]
    fn empty_region_aborts() {
        // N > 0 can never hold for a field that is globally negative.
        let region = Region::cube(3, 1.0)
            .unwrap()
            .require_positive(ScalarField::constant(-1.0), "nonpositive_lapse");
        assert!(matches!(
            sample_domain(&region, 10, 1),
            Err(Error::EmptyRegion { .. })
        ));
    }

    #[test]
    fn aggregation_is_order_insensitive() {
        let mut rng = crate::rng::CounterRng::new(2024);
        let values: Vec<f64> = (0..1000).map(|_| rng.uniform(0.0, 1e-7)).collect();
        let forward = aggregate(&values, 1e-8);
        let mut reversed = values.clone();
        reversed.reverse();
        let backward = aggregate(&reversed, 1e-8);
        assert_eq!(forward.max, backward.max);
        assert_eq!(forward.p95, backward.p95);
        // Compensated summation keeps the mean within ulp scale.
        assert!((forward.mean - backward.mean).abs() <= 1e-22);
    }

    #[test]
    fn minkowski_verifies_clean() {
        let sys = SystemInstance::minkowski(3);
        let region = Region::cube(3, 2.0).unwrap();
        let out = verify(
            &sys,
            &region,
            200,
            &Tolerances::default(),
            5,
            serde_json::json!({"family": "minkowski"}),
        )
        .unwrap();
        assert!(out.report.passed());
        for stats in out.report.channels.values() {
            assert_eq!(stats.max, 0.0);
        }
    }

    #[test]
    fn reports_are_deterministic_modulo_timestamp() {
        let fam = MultiCenterMp::new(3, vec![vec![0.0; 3]], vec![1.0], 1.0, -1.0, 1).unwrap();
        let sys = fam.system().unwrap();
        let region = Region::cube(3, 3.0)
            .unwrap()
            .exclude_ball(vec![0.0; 3], 0.3)
            .unwrap();
        let run = || {
            verify(
                &sys,
                &region,
                300,
                &Tolerances::default(),
                42,
                serde_json::json!({"family": "multicenter"}),
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(
            a.report.json_without_timestamp(),
            b.report.json_without_timestamp()
        );
        assert_eq!(points_csv(&a, 3), points_csv(&b, 3));
    }

    #[test]
    fn report_json_key_order_and_csv_header_are_stable() {
        let sys = SystemInstance::minkowski(3);
        let region = Region::cube(3, 1.0).unwrap();
        let out = verify(
            &sys,
            &region,
            10,
            &Tolerances::default(),
            1,
            serde_json::json!({"family": "minkowski"}),
        )
        .unwrap();
        let json = serde_json::to_string(&out.report).unwrap();
        let keys = [
            "\"schema_version\"",
            "\"solution\"",
            "\"region\"",
            "\"seed\"",
            "\"channels\"",
            "\"points\"",
            "\"verdict\"",
            "\"timestamp\"",
        ];
        let mut last = 0;
        for key in keys {
            let at = json[last..].find(key).expect(key) + last;
            assert!(at >= last, "key {key} out of order");
            last = at;
        }
        let csv = points_csv(&out, 3);
        assert!(csv.starts_with(
            "x1,x2,x3,lapse,maxwell,hessian_max,trace,lemma23,t1_offdiag,t1_diag,t1_psi,t1_N\n"
        ));
    }

    #[test]
    fn classical_family_passes_tight_tolerances() {
        let fam = MultiCenterMp::new(3, vec![vec![0.0; 3]], vec![1.0], 1.0, -1.0, 1).unwrap();
        let sys = fam.system().unwrap();
        let region = Region::cube(3, 3.0)
            .unwrap()
            .exclude_ball(vec![0.0; 3], 0.3)
            .unwrap();
        let out = verify(
            &sys,
            &region,
            1000,
            &Tolerances::uniform(1e-9),
            9,
            serde_json::json!({"family": "multicenter"}),
        )
        .unwrap();
        assert!(out.report.passed(), "channels: {:?}", out.report.channels);
    }

    #[test]
    fn perturbed_family_fails() {
        let fam = MultiCenterMp::new(3, vec![vec![0.0; 3]], vec![1.0], 1.0, -1.0, 1).unwrap();
        let sys = fam.system().unwrap();
        // Multiply N by (1 + 1e-3 x1).
        let bump = ScalarField::constant(1.0) + ScalarField::coordinate(0).scale(1e-3);
        let sys = sys.with_lapse(sys.lapse().clone() * bump);
        let region = Region::cube(3, 3.0)
            .unwrap()
            .exclude_ball(vec![0.0; 3], 0.3)
            .unwrap();
        let out = verify(
            &sys,
            &region,
            300,
            &Tolerances::default(),
            13,
            serde_json::json!({"family": "perturbed"}),
        )
        .unwrap();
        assert!(!out.report.passed());
        assert!(out.report.channels["hessian_max"].max >= 1e-4);
    }
}
