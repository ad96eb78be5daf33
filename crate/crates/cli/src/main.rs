use std::path::PathBuf;
use std::process::ExitCode;
use std::time::SystemTime;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use jpsw_core::space::ModelFile;
use jpsw_core::PolicyMap;
use jpsw_cli::commands::{self, Status};
use jpsw_cli::config::RunConfig;
use jpsw_cli::output::{json_bytes, Sink};

/// Stationary workload profiles of multi-server queues under allocation policies
#[derive(Parser)]
#[command(name = "jpsw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Forward trajectory as CSV
    Simulate,
    /// Backward Loynes sequence and its limit
    Loynes,
    /// Supremum statistics Z_1..Z_p per replication
    Zstats,
    /// Load conditions, loss estimate and tightness probe
    Stability,
    /// Exact periodic stationary profiles on a cyclic space
    FixedPoint,
    /// Exact check of the three-point counterexample
    Counterexample,
    /// Loss probability of the p-server loss system
    Loss,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Loynes => "loynes",
            Command::Zstats => "zstats",
            Command::Stability => "stability",
            Command::FixedPoint => "fixed-point",
            Command::Counterexample => "counterexample",
            Command::Loss => "loss",
        }
    }
}

#[derive(clap::Args)]
struct Flags {
    /// JSON run configuration; flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Model file {"space": ...}
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// jsw:S | jpsw:S:p | loss:p | gamma:p | psi:p | phi:S:p
    #[arg(long, global = true)]
    policy: Option<PolicyMap>,
    #[arg(long, global = true)]
    horizon: Option<usize>,
    /// Comma-separated horizon grid for the tightness probe
    #[arg(long, global = true, value_delimiter = ',')]
    horizons: Option<Vec<usize>>,
    #[arg(long, global = true)]
    replications: Option<usize>,
    #[arg(long, global = true)]
    burn_in: Option<usize>,
    #[arg(long, global = true)]
    truncation: Option<usize>,
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Number of servers S
    #[arg(long, global = true)]
    servers: Option<usize>,
    #[arg(long, global = true)]
    p: Option<usize>,
    /// Sample index where cyclic runs start
    #[arg(long, global = true, allow_hyphen_values = true)]
    start: Option<i64>,
    /// Comma-separated initial profile
    #[arg(long, global = true, value_delimiter = ',')]
    initial: Option<Vec<f64>>,
    /// Record every affine piece in fixed-point reports
    #[arg(long, global = true)]
    trace: bool,
    /// Output directory; without it the main artifact goes to stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl Flags {
    fn to_config(&self) -> Result<RunConfig> {
        let model = match &self.model {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("cannot read model {}", path.display()))?;
                let file: ModelFile =
                    serde_json::from_str(&text).with_context(|| format!("invalid model file {}", path.display()))?;
                Some(file.space)
            }
            None => None,
        };
        Ok(RunConfig {
            model,
            policy: self.policy,
            horizon: self.horizon,
            horizons: self.horizons.clone(),
            replications: self.replications,
            burn_in: self.burn_in,
            seed: self.seed,
            truncation: self.truncation,
            tolerance: self.tolerance,
            output_dir: self.out.clone(),
            servers: self.servers,
            p: self.p,
            start: self.start,
            initial: self.initial.clone(),
            trace: self.trace.then_some(true),
        })
    }
}

enum Failure {
    Invalid(anyhow::Error),
    Assertion,
}

fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    let started = SystemTime::now();
    let flags = cli.flags.to_config().map_err(Failure::Invalid)?;
    let base = match &cli.flags.config {
        Some(path) => RunConfig::load(path).map_err(Failure::Invalid)?,
        None => RunConfig::default(),
    };
    let cfg = base.merged(&flags);
    cfg.validate().map_err(Failure::Invalid)?;

    let go = || -> Result<Status> {
        let mut sink = Sink::new(cfg.output_dir.clone())?;
        // the output directory is left out so reruns elsewhere stay byte-identical
        let resolved = RunConfig { output_dir: None, ..cfg.clone() };
        sink.file("config.json", &json_bytes(&resolved)?)?;
        let status = match cli.command {
            Command::Simulate => commands::simulate(&cfg, &mut sink)?,
            Command::Loynes => commands::loynes(&cfg, &mut sink)?,
            Command::Zstats => commands::zstats(&cfg, &mut sink)?,
            Command::Stability => commands::stability(&cfg, &mut sink)?,
            Command::FixedPoint => commands::fixed_point(&cfg, &mut sink)?,
            Command::Counterexample => commands::counterexample(&cfg, &mut sink)?,
            Command::Loss => commands::loss(&cfg, &mut sink)?,
        };
        sink.finish(cli.command.name(), started)?;
        Ok(status)
    };
    match go().map_err(Failure::Invalid)? {
        Status::Ok => Ok(()),
        Status::AssertionFailed => Err(Failure::Assertion),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion) => {
            eprintln!("jpsw {}: check failed", cli.command.name());
            ExitCode::from(1)
        }
        Err(Failure::Invalid(e)) => {
            eprintln!("jpsw {}: {e:#}", cli.command.name());
            ExitCode::from(2)
        }
    }
}
