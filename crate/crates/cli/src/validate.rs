//! Built-in oracle suite behind the `validate` subcommand.
//!
//! Each check compares a computed quantity against an exact or frozen
//! reference and reports the residual with its tolerance.

use std::sync::Arc;
use std::time::Instant;

use kinetic::continuous_zz::{simulate_zz, LipschitzBound, PdmpState};
use kinetic::hybrid::{
    kinetic_identity_defect, ou_half_kick, reflect, HybridConfig, HybridSampler, HybridState, LjModel,
};
use kinetic::potentials::{
    ContinuousPotential, DiscretePotential, Domain, ForceSplit, LjParams, LjSystem, PotentialSpec, Quadratic,
};
use kinetic::rng::{fill_normal, keyed_rng, std_normal};
use kinetic::stats::{ks_pvalue, ks_statistic, stationarity_residual, variance};
use kinetic::zigzag1d::{clt_variance_bound, escape_samples, EscapeConfig};
use kinetic::zigzagd::{
    build_transition_matrix, lyapunov_report, sweep, Acceptance, LatticeState, LyapunovParams, SweepOrder,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::{CommandError, Report};
use crate::config::RunConfig;
use crate::output::{prefixed, write_atomic, Provenance};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
    /// Set when the check could not run.
    pub error: Option<String>,
}

type Probe = fn(u64) -> kinetic::Result<(f64, f64)>;

/// `(name, probe)`; a probe returns `(residual, tolerance)` and passes when
/// `residual <= tolerance`.
pub const CHECKS: &[(&str, Probe)] = &[
    ("lattice_invariance_double_well", lattice_invariance_double_well),
    ("lattice_invariance_random_order", lattice_invariance_random_order),
    ("lattice_invariance_factorized", lattice_invariance_factorized),
    ("sweep_flips_signature", sweep_flips_signature),
    ("clt_bound_abs_sign", clt_bound_abs_sign),
    ("escape_exit_side", escape_exit_side),
    ("lyapunov_drift_abs", lyapunov_drift_abs),
    ("zz_first_event_law", zz_first_event_law),
    ("reflection_isometry", reflection_isometry),
    ("ou_preserves_gaussian", ou_preserves_gaussian),
    ("lj_split_consistency", lj_split_consistency),
    ("hybrid_kinetic_identity", hybrid_kinetic_identity),
];

fn residual_on_torus(spec: &str, dim: usize, side: i64, acc: Acceptance, order: SweepOrder) -> kinetic::Result<f64> {
    let u = spec.parse::<PotentialSpec>()?.discrete(dim, Domain::Torus(side))?;
    let (space, p) = build_transition_matrix(&u, &acc, &order)?;
    Ok(stationarity_residual(&p, &space.invariant_measure(&u)))
}

fn lattice_invariance_double_well(_: u64) -> kinetic::Result<(f64, f64)> {
    Ok((residual_on_torus("doublewell:1.5,1.5,3", 1, 16, Acceptance::Plain, SweepOrder::Identity)?, 1e-12))
}

fn lattice_invariance_random_order(_: u64) -> kinetic::Result<(f64, f64)> {
    Ok((residual_on_torus("quadratic:0.7", 3, 4, Acceptance::Plain, SweepOrder::Random)?, 1e-12))
}

fn lattice_invariance_factorized(_: u64) -> kinetic::Result<(f64, f64)> {
    Ok((residual_on_torus("abs:0.8", 2, 6, Acceptance::Factorized, SweepOrder::Identity)?, 1e-12))
}

/// Every sweep must negate the parity-twisted velocity signature.
fn sweep_flips_signature(seed: u64) -> kinetic::Result<(f64, f64)> {
    let u = DiscretePotential::new(3, Domain::Lattice, |x| {
        x.iter().map(|&k| (k as f64).powi(2) * 0.3 + (k as f64).sin()).sum::<f64>() + 0.2 * (x[0] * x[1]) as f64
    });
    let mut rng = keyed_rng(seed, 1, 0, 0);
    let mut s = LatticeState::new(vec![2, -1, 0], vec![1, -1, 1]);
    let mut failures = 0u32;
    for _ in 0..50_000 {
        let before = s.signature();
        sweep(&mut s, &u, &Acceptance::Plain, &SweepOrder::Random, &mut rng)?;
        let after = s.signature();
        failures += before.iter().zip(&after).any(|(a, b)| a != &-b) as u32;
    }
    Ok((failures as f64, 0.0))
}

/// Frozen value of the asymptotic-variance constant for `U = |x|`, `f = sign`.
const ABS_SIGN_BOUND: f64 = 2.327_906_827_477_305_4;

fn clt_bound_abs_sign(_: u64) -> kinetic::Result<(f64, f64)> {
    let u = DiscretePotential::new(1, Domain::Lattice, |x| x[0].abs() as f64);
    let b = clt_variance_bound(&u, |x, _| (x.signum()) as f64, None)?;
    Ok(((b.m_f - ABS_SIGN_BOUND).abs(), 1e-9))
}

/// Empirical exit side against the exact probability `exp(-U(b)/eps)/p`,
/// as a z-score.
fn escape_exit_side(seed: u64) -> kinetic::Result<(f64, f64)> {
    let u = "doublewell:1,1.5,3".parse::<PotentialSpec>()?.discrete(1, Domain::Lattice)?;
    let cfg = EscapeConfig::new(u, -3, 3, 0, 0, 0.5);
    cfg.validate()?;
    let n = 20_000;
    let draws = escape_samples(&cfg, n, seed, 7)?;
    let right = draws.iter().filter(|s| !s.exit_left).count() as f64 / n as f64;
    let p = cfg.exit_right_probability();
    Ok(((right - p).abs() / (p * (1.0 - p) / n as f64).sqrt(), 4.0))
}

fn lyapunov_drift_abs(_: u64) -> kinetic::Result<(f64, f64)> {
    let u = DiscretePotential::new(2, Domain::Lattice, |x| x.iter().map(|&k| k.abs() as f64).sum());
    let report = lyapunov_report(&u, &LyapunovParams::defaults(1.0, 0.0), 8)?;
    let excess = report.max_violation.max(0.0) + report.assumption_violations as f64;
    Ok((excess, 1e-9 * report.constant.max(1.0)))
}

/// From the minimum of `y^2/2` moving up, the first flip time has
/// `P(T > s) = exp(-s^2/2)`; the residual is one minus the KS p-value.
fn zz_first_event_law(seed: u64) -> kinetic::Result<(f64, f64)> {
    let h: Arc<dyn ContinuousPotential> = Arc::new(Quadratic { dim: 1, stiffness: 1.0 });
    let init = PdmpState::new(vec![0.0], vec![1.0]);
    let n = 20_000;
    let times = (0..n)
        .into_par_iter()
        .map(|k| {
            let run = simulate_zz(h.as_ref(), &LipschitzBound::default(), 12.0, &init, &mut keyed_rng(seed, 2, k, 0))?;
            Ok(run.events.first().map_or(f64::INFINITY, |e| e.time))
        })
        .collect::<kinetic::Result<Vec<f64>>>()?;
    let d = ks_statistic(&times, |s| 1.0 - (-0.5 * s * s).exp())?;
    Ok((1.0 - ks_pvalue(d, n as f64), 0.999))
}

fn reflection_isometry(seed: u64) -> kinetic::Result<(f64, f64)> {
    let mut rng = keyed_rng(seed, 3, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let (mut v, mut f) = (vec![0.0; 6], vec![0.0; 6]);
        fill_normal(&mut rng, &mut v);
        fill_normal(&mut rng, &mut f);
        let w = reflect(&v, &f);
        let norm = |a: &[f64]| a.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max((norm(&w) - norm(&v)).abs() / norm(&v));
        let back = reflect(&w, &f);
        worst = worst.max(back.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / norm(&v));
    }
    Ok((worst, 1e-12))
}

/// One exact OU half kick without force maps N(0, 1) to itself; the residual
/// is the variance error in units of its standard error.
fn ou_preserves_gaussian(seed: u64) -> kinetic::Result<(f64, f64)> {
    let n = 200_000;
    let cfg = HybridConfig::new(0.3, 1.5, 0.0);
    let mut rng = keyed_rng(seed, 4, 0, 0);
    let mut v: Vec<f64> = (0..n).map(|_| std_normal(&mut rng)).collect();
    let zero = vec![0.0; n];
    ou_half_kick(&mut v, &zero, &cfg, &mut rng);
    Ok(((variance(&v) - 1.0).abs() / (2.0 / n as f64).sqrt(), 4.0))
}

fn lj_params() -> LjParams {
    LjParams { box_side: 5.43, radius: 1.0, energy_scale: 0.5, split_radius: 2.5 }
}

/// Short-range field plus all pair fields must rebuild the full gradient.
fn lj_split_consistency(seed: u64) -> kinetic::Result<(f64, f64)> {
    let params = lj_params();
    let m = 8;
    let split = ForceSplit::new(params, m)?;
    let mut rng = keyed_rng(seed, 5, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let mut x = LjSystem::cubic_lattice(params, m)?.positions;
        for c in x.iter_mut() {
            *c += 0.2 * std_normal(&mut rng);
        }
        params.wrap(&mut x);
        let mut full = vec![0.0; 3 * m];
        params.gradient(&x, &mut full)?;
        let mut rebuilt = vec![0.0; 3 * m];
        split.short_range(&x, &mut rebuilt)?;
        for i in 0..m {
            for j in (0..m).filter(|&j| j != i) {
                let g = split.pair_field(&x, i, j)?;
                for c in 0..3 {
                    rebuilt[3 * i + c] += g[c];
                }
            }
        }
        let scale = 1.0 + full.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let err = full.iter().zip(&rebuilt).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        worst = worst.max(err / scale);
    }
    Ok((worst, 1e-8))
}

/// Position updates must equal `delta (v + v') / 2` over every step.
fn hybrid_kinetic_identity(seed: u64) -> kinetic::Result<(f64, f64)> {
    let params = lj_params();
    let m = 8;
    let model = LjModel::new(ForceSplit::new(params, m)?, m);
    let mut v = vec![0.0; 3 * m];
    fill_normal(&mut keyed_rng(seed, 6, 0, 0), &mut v);
    let x = LjSystem::cubic_lattice(params, m)?.positions;
    let cfg = HybridConfig::new(0.005, 1.0, 0.5);
    let mut sampler = HybridSampler::new(model, cfg, HybridState::new(x, v), seed)?;
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let before = sampler.state.clone();
        sampler.step()?;
        worst = worst.max(kinetic_identity_defect(&before, &sampler.state, cfg.delta, Some(params.box_side)));
    }
    Ok((worst, 1e-12))
}

pub fn run_checks(seed: u64) -> Vec<Check> {
    CHECKS
        .iter()
        .map(|&(name, probe)| {
            let start = Instant::now();
            let outcome = probe(seed);
            let seconds = start.elapsed().as_secs_f64();
            match outcome {
                Ok((residual, tolerance)) => {
                    Check { name, residual, tolerance, passed: residual <= tolerance, seconds, error: None }
                }
                Err(e) => Check {
                    name,
                    residual: f64::NAN,
                    tolerance: f64::NAN,
                    passed: false,
                    seconds,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn junit_xml(checks: &[Check]) -> String {
    let failures = checks.iter().filter(|c| !c.passed).count();
    let total: f64 = checks.iter().map(|c| c.seconds).sum();
    let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str(&format!(
        "<testsuite name=\"kinetic-validate\" tests=\"{}\" failures=\"{failures}\" time=\"{total:.3}\">\n",
        checks.len()
    ));
    for c in checks {
        s.push_str(&format!("  <testcase name=\"{}\" time=\"{:.3}\"", c.name, c.seconds));
        if c.passed {
            s.push_str("/>\n");
        } else {
            let msg = c
                .error
                .clone()
                .unwrap_or_else(|| format!("residual {:e} exceeds tolerance {:e}", c.residual, c.tolerance));
            s.push_str(&format!(">\n    <failure message=\"{}\"/>\n  </testcase>\n", xml_escape(&msg)));
        }
    }
    s.push_str("</testsuite>\n");
    s
}

pub fn run(cfg: &RunConfig) -> Result<Report, CommandError> {
    let checks = run_checks(cfg.seed);
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "provenance": Provenance::of(cfg),
        "checks": checks,
    }))?;
    let paths = [prefixed(&cfg.out_prefix, "_junit.xml"), prefixed(&cfg.out_prefix, "_report.json")];
    write_atomic(&paths[0], junit_xml(&checks).as_bytes())?;
    write_atomic(&paths[1], json.as_bytes())?;
    let lines: Vec<String> = checks
        .iter()
        .map(|c| {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            match &c.error {
                Some(e) => format!("{verdict} {}: {e}", c.name),
                None => format!("{verdict} {}: residual {:.3e} (tolerance {:.1e})", c.name, c.residual, c.tolerance),
            }
        })
        .collect();
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CommandError::Failed(format!("{failed} of {} checks failed:\n{}", checks.len(), lines.join("\n"))));
    }
    Ok(Report { artifacts: paths.to_vec(), lines })
}
