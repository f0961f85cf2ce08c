//! Command-line front end. Flags override config-file keys, which
//! override built-in defaults. Exit codes: 0 success, 2 configuration
//! error, 3 numeric or I/O error; failures print a JSON error record to
//! stderr.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use inl_harness::config::{Experiment, ExperimentConfig, Overrides};
use inl_harness::{output, runner, Error};

#[derive(Parser)]
#[command(name = "inl", version, about = "Stochastic collapse dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Outcome frequencies and collapse times of the noisy two-level game
    Born(ExpArgs),
    /// Deterministic two-level collapse trajectory and its termination time
    CollapseTime(ExpArgs),
    /// Polar flow of two coupled spins: linear coupling against the drive
    Competition(ExpArgs),
    /// CP-violation magnitude estimate for the neutral kaon pair
    Kaon(ExpArgs),
    /// Subspace filters in dimension n: termination times and bisection
    Highdim(ExpArgs),
    /// Algebraic identity checks of the hat map over random states
    Props(ExpArgs),
}

#[derive(Args)]
struct ExpArgs {
    /// Flat key = value config file; flags given here win over it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Initial weight of branch 0
    #[arg(long)]
    alpha: Option<f64>,
    /// Drive strength; for kaon, eta in eV overriding the derived value
    #[arg(long)]
    eta: Option<f64>,
    /// Kaon coupling component g in eV, as gamma = g (1 + i)
    #[arg(long)]
    gamma: Option<f64>,
    /// State dimension
    #[arg(long)]
    n: Option<usize>,
    /// Filter size for highdim table mode (default n/2)
    #[arg(long)]
    m: Option<usize>,
    /// Ensemble size; sample count for props
    #[arg(long)]
    trajectories: Option<u64>,
    /// Master RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Integration step
    #[arg(long)]
    dt: Option<f64>,
    /// Competition start: polar angle in (0, pi)
    #[arg(long)]
    theta0: Option<f64>,
    /// Competition start: azimuth
    #[arg(long)]
    phi0: Option<f64>,
    /// Competition time horizon
    #[arg(long)]
    tmax: Option<f64>,
    /// Highdim mode: table, bisect, or bisect-noisy
    #[arg(long)]
    mode: Option<String>,
    /// Data file path; the manifest lands at <out>.manifest.json
    #[arg(long)]
    out: Option<PathBuf>,
    /// Data file format: csv or json
    #[arg(long)]
    format: Option<String>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

impl ExpArgs {
    fn to_overrides(&self) -> Result<Overrides, Error> {
        let mut ov = Overrides {
            alpha: self.alpha,
            eta: self.eta,
            gamma: self.gamma,
            n: self.n,
            m: self.m,
            trajectories: self.trajectories,
            seed: self.seed,
            dt: self.dt,
            theta0: self.theta0,
            phi0: self.phi0,
            tmax: self.tmax,
            out: self.out.clone(),
            threads: self.threads,
            ..Overrides::default()
        };
        if let Some(s) = &self.mode {
            ov.set("mode", s)?;
        }
        if let Some(s) = &self.format {
            ov.set("format", s)?;
        }
        Ok(ov)
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = execute(cli) {
        let record = serde_json::json!({
            "error": { "kind": e.kind(), "message": e.to_string() }
        });
        eprintln!("{record}");
        std::process::exit(e.exit_code());
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    let (experiment, args) = match &cli.command {
        Command::Born(a) => (Experiment::Born, a),
        Command::CollapseTime(a) => (Experiment::CollapseTime, a),
        Command::Competition(a) => (Experiment::Competition, a),
        Command::Kaon(a) => (Experiment::Kaon, a),
        Command::Highdim(a) => (Experiment::Highdim, a),
        Command::Props(a) => (Experiment::Props, a),
    };
    let flags = args.to_overrides()?;
    let from_file = match &args.config {
        Some(path) => Overrides::from_file(path)?,
        None => Overrides::default(),
    };
    let cfg = ExperimentConfig::resolve(experiment, flags.or(from_file));
    cfg.validate()?;

    let started = Instant::now();
    let result = match cfg.threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::config(format!("threads: {e}")))?;
            pool.install(|| runner::run(&cfg))?
        }
        None => runner::run(&cfg)?,
    };
    let wall = started.elapsed().as_secs_f64();

    if let Some(path) = &cfg.out {
        let config_echo = serde_json::to_value(&cfg).expect("config serializes");
        output::write_run(path, cfg.format, &result.table, &config_echo, &result.summary, wall)?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&result.summary).expect("summary serializes")
    );
    Ok(())
}
