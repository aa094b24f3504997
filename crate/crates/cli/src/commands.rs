//! Subcommand implementations. Each takes a validated [`RunConfig`], writes
//! its artifacts atomically and returns a short report.

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use kinetic::continuous_zz::{scaling_gap, Coupling, PdmpState};
use kinetic::hybrid::{HybridConfig, HybridSampler, HybridState, LjModel};
use kinetic::potentials::{
    read_xyz, ContinuousPotential, DiscretePotential, Domain, ForceSplit, LjParams, LjSystem, PotentialSpec,
};
use kinetic::rng::{fill_normal, keyed_rng};
use kinetic::stats::{ks_statistic, mean, stationarity_residual};
use kinetic::zigzag1d::{escape_samples, eyring_kramers_prediction, EscapeConfig};
use kinetic::zigzagd::{build_transition_matrix, sweep, Acceptance, LatticeState, SweepCounters, SweepOrder};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{ConfigErrors, RunConfig, Subcommand};
use crate::output::{prefixed, real, write_atomic, CsvTable, Provenance};
use crate::validate;

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("{0}")]
    Config(#[from] ConfigErrors),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] kinetic::Error),
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CommandError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) | CommandError::Invalid(_) => 2,
            CommandError::Core(kinetic::Error::Config(_) | kinetic::Error::DimensionMismatch { .. }) => 2,
            _ => 1,
        }
    }
}

/// What a successful run produced.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub artifacts: Vec<PathBuf>,
    pub lines: Vec<String>,
}

pub fn run(cfg: &RunConfig) -> Result<Report, CommandError> {
    match cfg.subcommand {
        Subcommand::Escape => escape(cfg),
        Subcommand::Zzd => zzd(cfg),
        Subcommand::ValidateInvariance => validate_invariance(cfg),
        Subcommand::Scaling => scaling(cfg),
        Subcommand::Hybrid => hybrid(cfg),
        Subcommand::Validate => validate::run(cfg),
    }
}

const ZZD_STREAM: u64 = 0x7a_7a64;
const VELOCITY_STREAM: u64 = 0x76_656c;

fn potential_spec(cfg: &RunConfig, key: &str) -> Result<PotentialSpec, CommandError> {
    cfg.string(key).parse().map_err(|e: kinetic::Error| CommandError::Invalid(format!("{key}: {e}")))
}

fn positive(cfg: &RunConfig, key: &str) -> Result<u64, CommandError> {
    match cfg.uint(key) {
        0 => Err(CommandError::Invalid(format!("{key} must be positive"))),
        n => Ok(n),
    }
}

fn sweep_order(cfg: &RunConfig) -> Result<SweepOrder, CommandError> {
    match cfg.string("order") {
        "id" | "identity" => Ok(SweepOrder::Identity),
        "random" => Ok(SweepOrder::Random),
        other => Err(CommandError::Invalid(format!("order must be 'id' or 'random', got '{other}'"))),
    }
}

fn lattice_potential(cfg: &RunConfig, domain: Domain) -> Result<DiscretePotential, CommandError> {
    let dim = positive(cfg, "dim")? as usize;
    if let Domain::Torus(n) = domain {
        if n < 2 {
            return Err(CommandError::Invalid("torus side must be at least 2".into()));
        }
    }
    Ok(potential_spec(cfg, "potential")?.discrete(dim, domain)?)
}

fn acceptance(cfg: &RunConfig, u: &DiscretePotential) -> Result<Acceptance, CommandError> {
    if !cfg.flag("factorized") {
        return Ok(Acceptance::Plain);
    }
    if u.factors().is_none() {
        return Err(CommandError::Invalid("factorized acceptance needs a potential with factor terms".into()));
    }
    Ok(Acceptance::Factorized)
}

fn escape(cfg: &RunConfig) -> Result<Report, CommandError> {
    let u = potential_spec(cfg, "potential")?.discrete(1, Domain::Lattice)?;
    let samples = positive(cfg, "samples")? as usize;
    let prov = Provenance::of(cfg);
    let mut table =
        CsvTable::with_header(&prov, &["eps", "mean_tau", "predicted_tau", "p_left", "predicted_p_left", "ks_exp"]);
    let mut report = Report::default();
    for (k, &eps) in cfg.reals("eps").iter().enumerate() {
        let mut ec = EscapeConfig::new(u.clone(), cfg.int("a"), cfg.int("b"), cfg.int("alpha"), cfg.int("beta"), eps);
        ec.step_cap = cfg.uint("step_cap");
        ec.validate()?;
        let draws = escape_samples(&ec, samples, cfg.seed, k as u64)?;
        let taus: Vec<f64> = draws.iter().map(|s| s.tau as f64).collect();
        let mean_tau = mean(&taus);
        let p_left = draws.iter().filter(|s| s.exit_left).count() as f64 / samples as f64;
        let scaled: Vec<f64> = taus.iter().map(|t| t / mean_tau).collect();
        let ks = ks_statistic(&scaled, |x| 1.0 - (-x).exp())?;
        let pred = eyring_kramers_prediction(&ec);
        table.row(&[real(eps), real(mean_tau), real(pred.mean_tau), real(p_left), real(pred.p_exit_left), real(ks)]);
        report.lines.push(format!(
            "eps={eps}: mean tau {mean_tau:.4e} (predicted {:.4e}), left exits {p_left:.4}, KS {ks:.4}",
            pred.mean_tau
        ));
    }
    let path = prefixed(&cfg.out_prefix, ".csv");
    table.write(&path)?;
    report.artifacts.push(path);
    Ok(report)
}

fn zzd(cfg: &RunConfig) -> Result<Report, CommandError> {
    let domain = match cfg.opt_uint("torus") {
        Some(n) => Domain::Torus(n as i64),
        None => Domain::Lattice,
    };
    let u = lattice_potential(cfg, domain)?;
    let acc = acceptance(cfg, &u)?;
    let order = sweep_order(cfg)?;
    let (steps, chains, every) = (cfg.uint("steps"), positive(cfg, "chains")?, positive(cfg, "every")?);
    let d = u.dim();
    let prov = Provenance::of(cfg);
    let mut header = vec!["step".to_string()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    header.extend((1..=d).map(|i| format!("v{i}")));

    let runs = (0..chains)
        .into_par_iter()
        .map(|c| -> Result<(CsvTable, SweepCounters), CommandError> {
            let mut rng = keyed_rng(cfg.seed, ZZD_STREAM, c, 0);
            let mut s = LatticeState::new(vec![0; d], vec![1; d]);
            let mut table = CsvTable::new(&prov, &header);
            let mut counters = SweepCounters::default();
            let record = |table: &mut CsvTable, step: u64, s: &LatticeState| {
                let mut row = vec![step.to_string()];
                row.extend(s.x.iter().chain(&s.v).map(i64::to_string));
                table.row(&row);
            };
            record(&mut table, 0, &s);
            for step in 1..=steps {
                counters.add(&sweep(&mut s, &u, &acc, &order, &mut rng)?);
                if step % every == 0 {
                    record(&mut table, step, &s);
                }
            }
            Ok((table, counters))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut report = Report::default();
    let mut total = SweepCounters::default();
    for (c, (table, counters)) in runs.iter().enumerate() {
        let path = if chains == 1 {
            prefixed(&cfg.out_prefix, "_traj.csv")
        } else {
            prefixed(&cfg.out_prefix, &format!("_traj_c{c}.csv"))
        };
        table.write(&path)?;
        report.artifacts.push(path);
        total.add(counters);
    }
    let moves = (total.accepted + total.flipped).max(1) as f64;
    report.lines.push(format!(
        "{chains} chain(s) x {steps} sweeps in d={d}: move acceptance {:.4}",
        total.accepted as f64 / moves
    ));
    Ok(report)
}

fn validate_invariance(cfg: &RunConfig) -> Result<Report, CommandError> {
    let u = lattice_potential(cfg, Domain::Torus(cfg.uint("torus") as i64))?;
    let acc = acceptance(cfg, &u)?;
    let order = sweep_order(cfg)?;
    let (space, p) = build_transition_matrix(&u, &acc, &order)?;
    let residual = stationarity_residual(&p, &space.invariant_measure(&u));
    let tolerance = cfg.real("tolerance");
    println!("{}", real(residual));
    let line = format!("L1 stationarity residual {residual:.3e} over {} states (tolerance {tolerance:e})", space.len());
    if residual > tolerance {
        return Err(CommandError::Failed(line));
    }
    Ok(Report { artifacts: Vec::new(), lines: vec![line] })
}

fn scaling(cfg: &RunConfig) -> Result<Report, CommandError> {
    let dim = positive(cfg, "dim")? as usize;
    let h: Arc<dyn ContinuousPotential> = potential_spec(cfg, "H")?.continuous(dim)?;
    let coupling = match cfg.string("coupling") {
        "independent" => Coupling::Independent,
        "shared" => Coupling::SharedClocks,
        other => return Err(CommandError::Invalid(format!("coupling must be 'independent' or 'shared', got '{other}'"))),
    };
    let init = PdmpState::new(vec![0.0; dim], vec![1.0; dim]);
    let points = scaling_gap(&h, &init, cfg.reals("eps"), cfg.real("t"), positive(cfg, "samples")? as usize, cfg.seed, coupling)?;
    let mut table = CsvTable::with_header(&Provenance::of(cfg), &["eps", "w1"]);
    let mut report = Report::default();
    for p in &points {
        table.row(&[real(p.eps), real(p.w1)]);
        report.lines.push(format!("eps={}: W1 {:.5e}", p.eps, p.w1));
    }
    let path = prefixed(&cfg.out_prefix, ".csv");
    table.write(&path)?;
    report.artifacts.push(path);
    Ok(report)
}

/// Initial positions from `xyz_in` or a cubic lattice; the file fixes the
/// particle count and box side unless they were set explicitly and disagree.
fn initial_system(cfg: &RunConfig, mut params: LjParams) -> Result<LjSystem, CommandError> {
    let Some(path) = cfg.opt_string("xyz_in") else {
        return Ok(LjSystem::cubic_lattice(params, positive(cfg, "M")? as usize)?);
    };
    let text = fs::read_to_string(path).map_err(|e| CommandError::Invalid(format!("xyz_in '{path}': {e}")))?;
    let xyz = read_xyz(&text).map_err(|e| CommandError::Invalid(format!("xyz_in '{path}': {e}")))?;
    let m = xyz.positions.len() / 3;
    if cfg.is_explicit("M") && cfg.uint("M") as usize != m {
        return Err(CommandError::Invalid(format!("M = {} but '{path}' holds {m} particles", cfg.uint("M"))));
    }
    if cfg.is_explicit("a") && cfg.real("a") != xyz.box_side {
        return Err(CommandError::Invalid(format!("a = {} but '{path}' has box side {}", cfg.real("a"), xyz.box_side)));
    }
    params.box_side = xyz.box_side;
    Ok(LjSystem::new(params, xyz.positions)?)
}

fn hybrid(cfg: &RunConfig) -> Result<Report, CommandError> {
    let params = LjParams {
        box_side: cfg.real("a"),
        radius: cfg.real("r"),
        energy_scale: cfg.real("U0"),
        split_radius: cfg.real("R"),
    };
    let system = initial_system(cfg, params)?;
    let m = system.len();
    let split = ForceSplit::new(system.params, m)?;
    let mut hcfg = HybridConfig::new(cfg.real("delta"), cfg.real("gamma"), cfg.real("lambda"));
    hcfg.split = cfg.string("split").parse()?;
    hcfg.ou_mode = cfg.string("ou_mode").parse()?;
    hcfg.jump = cfg.string("jump").parse()?;
    let mut v = vec![0.0; 3 * m];
    fill_normal(&mut keyed_rng(cfg.seed, VELOCITY_STREAM, 0, 0), &mut v);
    let mut sampler = HybridSampler::new(LjModel::new(split, m), hcfg, HybridState::new(system.positions, v), cfg.seed)?;

    let (steps, stride, block) = (cfg.uint("steps"), positive(cfg, "traj_every")?, positive(cfg, "block")?);
    let prov = Provenance::of(cfg);
    let mut header = vec!["step".to_string(), "time".to_string()];
    for axis in ["x", "v"] {
        for i in 1..=m {
            header.extend(["x", "y", "z"].iter().map(|c| format!("{axis}{i}_{c}")));
        }
    }
    let mut traj = CsvTable::new(&prov, &header);
    let mut cost = CsvTable::with_header(&prov, &["step", "f0_evals", "gij_evals", "proposals", "accepts"]);
    let mut stats = serde_json::to_string(&json!({ "provenance": prov }))?;
    stats.push('\n');

    let phase_row = |s: &HybridSampler<LjModel>| {
        let mut row = vec![s.state.step.to_string(), real(s.elapsed())];
        row.extend(s.state.x.iter().chain(&s.state.v).map(|&c| real(c)));
        row
    };
    traj.row(&phase_row(&sampler));
    let (mut ke_sum, mut in_block, mut block_index) = (0.0, 0u64, 0u64);
    for step in 1..=steps {
        sampler.step()?;
        ke_sum += sampler.state.kinetic_energy();
        in_block += 1;
        if step % stride == 0 {
            traj.row(&phase_row(&sampler));
        }
        if step % block == 0 || step == steps {
            let c = &sampler.counters;
            let record = json!({
                "block": block_index,
                "step": step,
                "time": sampler.elapsed(),
                "mean_kinetic_energy": ke_sum / in_block as f64,
                "kinetic_energy": sampler.state.kinetic_energy(),
                "potential_energy": sampler.model.split.params.energy(&sampler.state.x)?,
                "counters": c,
            });
            stats.push_str(&serde_json::to_string(&record)?);
            stats.push('\n');
            cost.row(&[
                step.to_string(),
                c.f0_evals.to_string(),
                c.gij_evals.to_string(),
                c.jump_proposals.to_string(),
                c.jumps_accepted.to_string(),
            ]);
            ke_sum = 0.0;
            in_block = 0;
            block_index += 1;
        }
    }

    let paths = [
        prefixed(&cfg.out_prefix, "_traj.csv"),
        prefixed(&cfg.out_prefix, "_stats.jsonl"),
        prefixed(&cfg.out_prefix, "_cost.csv"),
    ];
    traj.write(&paths[0])?;
    write_atomic(&paths[1], stats.as_bytes())?;
    cost.write(&paths[2])?;
    let c = &sampler.counters;
    let per_step = |n: u64| n as f64 / steps.max(1) as f64;
    Ok(Report {
        artifacts: paths.to_vec(),
        lines: vec![format!(
            "{m} particles, {steps} steps: {:.2} pair-field evaluations and {:.3} accepted jumps per step, max acceptance ratio {:.6}",
            per_step(c.gij_evals),
            per_step(c.jumps_accepted),
            c.max_accept_ratio
        )],
    })
}
