//! Batch front-end: parse solution configs, run verification, reduction,
//! and diagnostics, write reports.
//!
//! Exit codes: 0 success/pass, 1 verdict failure or runtime diagnostic
//! (constraint drift, non-separable, ...), 2 usage/config error. Human
//! text goes to stderr; machine output goes to files or stdout.

mod config;

use config::{
    BoundsRunConfig, QuadricInitialConfig, ReduceConfig, ReduceRunConfig, RunConfig,
    SeparabilityRunConfig, SolutionConfig,
};
use electrovac::error::Error;
use electrovac::harness::{points_csv, verify, ResidualReport};
use electrovac::invariants::{separability_check, DilationInvariant, SeparabilityOptions};
use electrovac::reduction::{
    consistent_psi_slope, integrate_quadric_system, mp_affine_initial, solve_lapse_from_invariant,
    LapseProfile, QuadricOdeState, QuadricParams, QuadricTolerances, SolveOptions,
};
use electrovac::solutions::DilationMp;
use serde_json::json;
use std::process::ExitCode;

struct CliError {
    kind: &'static str,
    message: String,
    exit: u8,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: "usage",
            message: message.into(),
            exit: 2,
        }
    }

    fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: "config",
            message: message.into(),
            exit: 2,
        }
    }

    fn io(message: impl Into<String>) -> Self {
        CliError {
            kind: "io",
            message: message.into(),
            exit: 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        // Parameter-shaped problems are config errors; the rest are
        // runtime diagnostics.
        let exit = match e {
            Error::InvalidParameter(_)
            | Error::DimensionMismatch { .. }
            | Error::ZeroSlope
            | Error::DegenerateDiscriminant(_)
            | Error::CoincidentCenters(..) => 2,
            _ => 1,
        };
        CliError {
            kind: if exit == 2 { "config" } else { "runtime" },
            message: e.to_string(),
            exit,
        }
    }
}

#[derive(Default)]
struct Flags {
    config: Option<String>,
    seed: Option<u64>,
    points: Option<usize>,
    out: Option<String>,
    csv: Option<String>,
    tolerances: Vec<(String, f64)>,
}

fn parse_flags(args: &[String]) -> Result<Flags, CliError> {
    let mut flags = Flags::default();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let mut take = || {
            it.next()
                .cloned()
                .ok_or_else(|| CliError::usage(format!("flag {arg} expects a value")))
        };
        match arg.as_str() {
            "--config" => flags.config = Some(take()?),
            "--seed" => {
                flags.seed = Some(
                    take()?
                        .parse()
                        .map_err(|e| CliError::usage(format!("--seed: {e}")))?,
                )
            }
            "--points" => {
                flags.points = Some(
                    take()?
                        .parse()
                        .map_err(|e| CliError::usage(format!("--points: {e}")))?,
                )
            }
            "--out" => flags.out = Some(take()?),
            "--csv" => flags.csv = Some(take()?),
            "--tolerance" => {
                let spec = take()?;
                let (channel, value) = spec
                    .split_once('=')
                    .ok_or_else(|| CliError::usage("--tolerance expects CHANNEL=VALUE"))?;
                let value: f64 = value
                    .parse()
                    .map_err(|e| CliError::usage(format!("--tolerance value: {e}")))?;
                flags.tolerances.push((channel.to_string(), value));
            }
            other => return Err(CliError::usage(format!("unknown flag {other}"))),
        }
    }
    Ok(flags)
}

fn read_config_value(flags: &Flags) -> Result<serde_json::Value, CliError> {
    let path = flags
        .config
        .as_ref()
        .ok_or_else(|| CliError::usage("--config PATH is required"))?;
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {path}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("parsing {path}: {e}")))
}

fn write_output(path: Option<&str>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            std::fs::write(p, contents).map_err(|e| CliError::io(format!("writing {p}: {e}")))
        }
        None => {
            println!("{contents}");
            Ok(())
        }
    }
}

fn cmd_verify(flags: &Flags) -> Result<u8, CliError> {
    let value = read_config_value(flags)?;
    // A previously emitted report is itself a valid config: its embedded
    // solution/region/seed/tolerances are the fully resolved run.
    let mut cfg: RunConfig = if value.get("schema_version").is_some() {
        let report: ResidualReport = serde_json::from_value(value)
            .map_err(|e| CliError::config(format!("parsing report as config: {e}")))?;
        RunConfig::from_report(&report)?
    } else {
        serde_json::from_value(value).map_err(|e| CliError::config(e.to_string()))?
    };
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if let Some(points) = flags.points {
        cfg.points = points;
    }
    for (channel, tol) in &flags.tolerances {
        cfg.tolerances.insert(channel.clone(), *tol);
    }

    let solution = cfg.solution.resolved();
    let system = solution.build_system()?;
    let region = cfg.region.resolved().build(&solution)?;
    let tolerances = cfg.tolerances()?;
    let descriptor = serde_json::to_value(&solution)
        .map_err(|e| CliError::config(format!("serializing solution: {e}")))?;

    let outcome = verify(
        &system,
        &region,
        cfg.points,
        &tolerances,
        cfg.seed,
        descriptor,
    )?;

    let report_json =
        serde_json::to_string_pretty(&outcome.report).map_err(|e| CliError::io(e.to_string()))?;
    write_output(
        flags.out.as_deref().or(cfg.output.report.as_deref()),
        &report_json,
    )?;
    if let Some(csv_path) = flags.csv.as_deref().or(cfg.output.csv.as_deref()) {
        write_output(Some(csv_path), &points_csv(&outcome, solution.n()))?;
    }
    eprintln!(
        "verdict: {} ({} points accepted, {} drawn)",
        outcome.report.verdict, outcome.report.points.accepted, outcome.report.points.requested
    );
    Ok(if outcome.report.passed() { 0 } else { 1 })
}

fn cmd_reduce(flags: &Flags) -> Result<u8, CliError> {
    let cfg: ReduceRunConfig = serde_json::from_value(read_config_value(flags)?)
        .map_err(|e| CliError::config(e.to_string()))?;
    match &cfg.reduce {
        ReduceConfig::LapseProfile {
            invariant,
            k,
            k1,
            interval,
            knots,
        } => {
            let inv = invariant.build_invariant()?.ok_or(Error::NotSeparable(
                "this invariant has no separable closed form".into(),
            ))?;
            let mut opts = SolveOptions::default();
            if let Some(kn) = knots {
                opts.knots = *kn;
            }
            let solved =
                solve_lapse_from_invariant(&inv, *k, *k1, (interval[0], interval[1]), &opts)?;
            let summary = json!({
                "mode": "lapse_profile",
                "interval": interval,
                "k": k,
                "k1": k1,
                "closed_form": solved.closed_form,
                "closed_form_deviation": solved.closed_form_deviation,
            });
            write_output(
                flags.out.as_deref().or(cfg.output.report.as_deref()),
                &serde_json::to_string_pretty(&summary).expect("summary serializes"),
            )?;
            if let Some(csv_path) = flags.csv.as_deref().or(cfg.output.csv.as_deref()) {
                let LapseProfile::Table(table) = &solved.profile else {
                    unreachable!("solver returns tables")
                };
                let mut csv = String::from("xi,U,dU\n");
                for (xi, u, du) in table.knots() {
                    csv.push_str(&format!("{xi},{u},{du}\n"));
                }
                write_output(Some(csv_path), &csv)?;
            }
            eprintln!("lapse profile solved on [{}, {}]", interval[0], interval[1]);
            Ok(0)
        }
        ReduceConfig::QuadricSystem {
            n,
            tau,
            gamma,
            theta,
            lambda,
            initial,
            xi_end,
        } => {
            let inv = electrovac::invariants::QuadricInvariant::new(
                *tau,
                gamma.clone(),
                theta.clone(),
                None,
            )?;
            if inv.n() != *n {
                return Err(CliError::config("gamma/theta length must equal n"));
            }
            let params = QuadricParams::from_invariant(&inv, *lambda);
            let init = match initial {
                QuadricInitialConfig::MpAffine { xi, a, c } => mp_affine_initial(*n, *xi, *a, *c)?,
                QuadricInitialConfig::Explicit {
                    xi,
                    phi,
                    dphi,
                    lapse,
                    dlapse,
                    psi,
                    dpsi,
                } => QuadricOdeState {
                    xi: *xi,
                    phi: *phi,
                    dphi: *dphi,
                    lapse: *lapse,
                    dlapse: *dlapse,
                    psi: *psi,
                    dpsi: *dpsi,
                },
                QuadricInitialConfig::SolvePsiSlope {
                    xi,
                    phi,
                    dphi,
                    lapse,
                    dlapse,
                    psi,
                } => {
                    let dpsi = consistent_psi_slope(&params, *xi, *phi, *dphi, *lapse, *dlapse)?;
                    QuadricOdeState {
                        xi: *xi,
                        phi: *phi,
                        dphi: *dphi,
                        lapse: *lapse,
                        dlapse: *dlapse,
                        psi: *psi,
                        dpsi,
                    }
                }
            };
            let traj =
                integrate_quadric_system(&params, &init, *xi_end, &QuadricTolerances::default())?;
            let summary = json!({
                "mode": "quadric_system",
                "xi_range": traj.xi_range(),
                "knots": traj.knots.len(),
                "max_constraint": traj.max_constraint(),
                "lambda": lambda,
            });
            write_output(
                flags.out.as_deref().or(cfg.output.report.as_deref()),
                &serde_json::to_string_pretty(&summary).expect("summary serializes"),
            )?;
            if let Some(csv_path) = flags.csv.as_deref().or(cfg.output.csv.as_deref()) {
                write_output(Some(csv_path), &traj.to_csv())?;
            }
            eprintln!(
                "trajectory integrated, max constraint {}",
                traj.max_constraint()
            );
            Ok(0)
        }
    }
}

fn cmd_separability(flags: &Flags) -> Result<u8, CliError> {
    let cfg: SeparabilityRunConfig = serde_json::from_value(read_config_value(flags)?)
        .map_err(|e| CliError::config(e.to_string()))?;
    let xi = cfg.xi.build_field()?;
    let opts = SeparabilityOptions::centered_at(cfg.center.clone(), cfg.ray_radius);
    let report = separability_check(&xi, &cfg.levels, cfg.samples_per_level, cfg.seed, &opts)?;
    let levels: Vec<serde_json::Value> = report
        .levels
        .iter()
        .map(|l| {
            json!({
                "level": l.level,
                "samples": l.samples,
                "laplacian_spread": l.laplacian_spread,
                "hessian_spread": l.hessian_spread,
            })
        })
        .collect();
    let out = json!({
        "levels": levels,
        "lapse_separable": report.lapse_separable,
        "hessian_separable": report.hessian_separable,
        "separable": report.separable,
        "tol_sep": report.tol_sep,
        "verdict": if report.separable { "separable" } else { "non-separable" },
    });
    write_output(
        flags.out.as_deref().or(cfg.output.report.as_deref()),
        &serde_json::to_string_pretty(&out).expect("summary serializes"),
    )?;
    eprintln!(
        "separability: {}",
        if report.separable {
            "separable"
        } else {
            "non-separable"
        }
    );
    Ok(if report.separable { 0 } else { 1 })
}

fn cmd_bounds(flags: &Flags) -> Result<u8, CliError> {
    let cfg: BoundsRunConfig = serde_json::from_value(read_config_value(flags)?)
        .map_err(|e| CliError::config(e.to_string()))?;
    let SolutionConfig::Dilation {
        n,
        a,
        b,
        k,
        k1,
        sign,
        ..
    } = &cfg.solution
    else {
        return Err(CliError::config(
            "bounds requires a dilation-family solution",
        ));
    };
    let inv = DilationInvariant::new(*n, a.clone(), b.clone())?;
    let family = DilationMp::new(inv, *k, *k1, *sign)?;
    let (lo, hi) = family.lapse_bounds();
    let equivalence = family.uniform_equivalence().ok();
    let out = json!({
        "A": lo,
        "B": hi,
        "certified": equivalence.is_some(),
        "c1": equivalence.map(|(c1, _)| c1),
        "c2": equivalence.map(|(_, c2)| c2),
    });
    write_output(
        flags.out.as_deref().or(cfg.output.report.as_deref()),
        &serde_json::to_string_pretty(&out).expect("summary serializes"),
    )?;
    eprintln!(
        "lapse bounds A = {lo}, B = {hi}{}",
        if equivalence.is_some() {
            ", uniform equivalence certified"
        } else {
            "; A <= 0, uniform equivalence not certified"
        }
    );
    Ok(if equivalence.is_some() { 0 } else { 1 })
}

fn dispatch() -> Result<u8, CliError> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(command) = args.first() else {
        return Err(CliError::usage(
            "usage: electrovac <verify|reduce|separability|bounds> --config PATH \
             [--seed INT] [--points INT] [--out PATH] [--csv PATH] [--tolerance CHANNEL=VALUE]",
        ));
    };
    let flags = parse_flags(&args[1..])?;
    match command.as_str() {
        "verify" => cmd_verify(&flags),
        "reduce" => cmd_reduce(&flags),
        "separability" => cmd_separability(&flags),
        "bounds" => cmd_bounds(&flags),
        other => Err(CliError::usage(format!("unknown command {other}"))),
    }
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let payload = json!({"error": {"kind": e.kind, "message": e.message}});
            eprintln!("{payload}");
            ExitCode::from(e.exit)
        }
    }
}
