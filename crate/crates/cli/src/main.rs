use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand as ClapSubcommand};
use kinetic_cli::{parse_with_overrides, run, CommandError, RunConfig, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "kinetic", version, about = "Lattice Zig-Zag walks, Zig-Zag processes and hybrid kinetic samplers")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Flat `key = value` configuration file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Prefix for output files.
    #[arg(long, global = true)]
    out_prefix: Option<String>,
    #[arg(long, global = true)]
    threads: Option<String>,
}

#[derive(ClapSubcommand, Debug)]
enum Command {
    /// Metastable escape times of the 1-D walk at decreasing temperature.
    Escape {
        #[arg(long)]
        potential: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        b: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<String>,
        /// Temperature; repeat for a sweep.
        #[arg(long)]
        eps: Vec<String>,
        #[arg(long)]
        samples: Option<String>,
        #[arg(long)]
        step_cap: Option<String>,
    },
    /// Trajectories of the lattice Zig-Zag sampler.
    Zzd {
        #[arg(long)]
        dim: Option<String>,
        #[arg(long)]
        potential: Option<String>,
        #[arg(long)]
        torus: Option<String>,
        #[arg(long)]
        steps: Option<String>,
        #[arg(long)]
        chains: Option<String>,
        #[arg(long)]
        every: Option<String>,
        #[arg(long)]
        factorized: bool,
        /// `id` or `random`.
        #[arg(long)]
        order: Option<String>,
    },
    /// Exact stationarity residual of the lattice sampler on a torus.
    ValidateInvariance {
        #[arg(long)]
        dim: Option<String>,
        #[arg(long)]
        potential: Option<String>,
        #[arg(long)]
        torus: Option<String>,
        #[arg(long)]
        factorized: bool,
        #[arg(long)]
        order: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        tolerance: Option<String>,
    },
    /// Distance between the rescaled lattice walk and the continuous process.
    Scaling {
        #[arg(long = "H")]
        h: Option<String>,
        #[arg(long)]
        dim: Option<String>,
        /// Lattice spacing; repeat for a sweep.
        #[arg(long)]
        eps: Vec<String>,
        #[arg(long)]
        t: Option<String>,
        #[arg(long)]
        samples: Option<String>,
        /// `independent` or `shared`.
        #[arg(long)]
        coupling: Option<String>,
    },
    /// Lennard-Jones particles under the hybrid splitting scheme.
    Hybrid,
    /// Built-in oracle suite with JUnit and JSON reports.
    Validate,
}

fn push(out: &mut Vec<(String, String)>, key: &str, value: Option<String>) {
    if let Some(v) = value {
        out.push((key.to_owned(), v));
    }
}

fn push_list(out: &mut Vec<(String, String)>, key: &str, values: Vec<String>) {
    if !values.is_empty() {
        out.push((key.to_owned(), values.join(",")));
    }
}

fn push_flag(out: &mut Vec<(String, String)>, key: &str, set: bool) {
    if set {
        out.push((key.to_owned(), "true".to_owned()));
    }
}

fn overrides(command: Command) -> (Subcommand, Vec<(String, String)>) {
    let mut o = Vec::new();
    let sub = match command {
        Command::Escape { potential, a, b, alpha, beta, eps, samples, step_cap } => {
            push(&mut o, "potential", potential);
            push(&mut o, "a", a);
            push(&mut o, "b", b);
            push(&mut o, "alpha", alpha);
            push(&mut o, "beta", beta);
            push_list(&mut o, "eps", eps);
            push(&mut o, "samples", samples);
            push(&mut o, "step_cap", step_cap);
            Subcommand::Escape
        }
        Command::Zzd { dim, potential, torus, steps, chains, every, factorized, order } => {
            push(&mut o, "dim", dim);
            push(&mut o, "potential", potential);
            push(&mut o, "torus", torus);
            push(&mut o, "steps", steps);
            push(&mut o, "chains", chains);
            push(&mut o, "every", every);
            push_flag(&mut o, "factorized", factorized);
            push(&mut o, "order", order);
            Subcommand::Zzd
        }
        Command::ValidateInvariance { dim, potential, torus, factorized, order, tolerance } => {
            push(&mut o, "dim", dim);
            push(&mut o, "potential", potential);
            push(&mut o, "torus", torus);
            push_flag(&mut o, "factorized", factorized);
            push(&mut o, "order", order);
            push(&mut o, "tolerance", tolerance);
            Subcommand::ValidateInvariance
        }
        Command::Scaling { h, dim, eps, t, samples, coupling } => {
            push(&mut o, "H", h);
            push(&mut o, "dim", dim);
            push_list(&mut o, "eps", eps);
            push(&mut o, "t", t);
            push(&mut o, "samples", samples);
            push(&mut o, "coupling", coupling);
            Subcommand::Scaling
        }
        Command::Hybrid => Subcommand::Hybrid,
        Command::Validate => Subcommand::Validate,
    };
    (sub, o)
}

fn load(common: &Common, sub: Subcommand, mut extra: Vec<(String, String)>) -> Result<RunConfig, CommandError> {
    let text = match &common.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CommandError::Invalid(format!("cannot read config '{}': {e}", path.display())))?,
        None => String::new(),
    };
    push(&mut extra, "seed", common.seed.clone());
    push(&mut extra, "out_prefix", common.out_prefix.clone());
    push(&mut extra, "threads", common.threads.clone());
    Ok(parse_with_overrides(sub, &text, &extra)?)
}

/// `KINETIC_THREADS` wins over the configured count.
fn init_threads(cfg: &RunConfig) -> Result<()> {
    let from_env = match std::env::var("KINETIC_THREADS") {
        Ok(v) => Some(v.trim().parse::<usize>().with_context(|| format!("KINETIC_THREADS='{v}' is not a thread count"))?),
        Err(_) => None,
    };
    if let Some(n) = from_env.or(cfg.threads) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<i32> {
    let (sub, extra) = overrides(cli.command);
    let cfg = match load(&cli.common, sub, extra) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("kinetic {sub}: configuration error\n{e}");
            return Ok(e.exit_code());
        }
    };
    init_threads(&cfg)?;
    if cfg.seed_defaulted && sub != Subcommand::Validate {
        eprintln!("warning: no seed given, using 0; pass --seed for reproducible published runs");
    }
    match run(&cfg) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            for path in &report.artifacts {
                println!("wrote {}", path.display());
            }
            Ok(0)
        }
        Err(e) => {
            eprintln!("kinetic {sub}: {e}");
            Ok(e.exit_code())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("kinetic: {e:#}");
            ExitCode::from(1)
        }
    }
}
