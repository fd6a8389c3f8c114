//! Command-line driver: one experiment per invocation, configured by a flat
//! key-value file, with CSV tables and a JSON manifest as output.

pub mod config;
pub mod output;
pub mod run;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use config::{parse_config, ConfigError, Expectation, Experiment, ExperimentConfig, SchemeChoice, KEY_REFERENCE};
pub use run::{config_failure, run, RunReport, Status};

const EXIT_CODES: &str = "\
Exit codes: 0 all assertions passed, 1 an assertion failed (see failures.json),
2 configuration or setup error. manifest.json is written in every case.";

#[derive(Debug, Parser)]
#[command(version, about, long_about = None, after_help = format!("{KEY_REFERENCE}\n\n{EXIT_CODES}"))]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Config file with one `key = value` per line
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory, overriding the config's `out` [default: out]
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Base seed, overriding the config's `seed` [default: 0]
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Print nothing on success
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Solve one Schrodinger system and write potentials and costs
    Solve,
    /// Compare eps * cost with W2^2 / 2 along a decreasing eps list (1D)
    LimitSweep,
    /// Check that collapsing the target never lowers the entropic cost
    Monotonicity,
    /// Test the W2 contraction criterion against the monotone map (1D)
    GjCheck,
    /// Cross-check the convex-order oracles
    OrderCheck,
    /// Convexity closure of the fixed-point map and the semigroup
    PrekopaSuite,
}

impl Command {
    pub fn experiment(self) -> Experiment {
        match self {
            Command::Solve => Experiment::Solve,
            Command::LimitSweep => Experiment::LimitSweep,
            Command::Monotonicity => Experiment::Monotonicity,
            Command::GjCheck => Experiment::GjCheck,
            Command::OrderCheck => Experiment::OrderCheck,
            Command::PrekopaSuite => Experiment::PrekopaSuite,
        }
    }
}

/// Builds the configuration from the file and the flags.
pub fn resolve(cli: &Cli) -> Result<ExperimentConfig, String> {
    let text = match &cli.config {
        Some(p) => fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text).map_err(|e| e.to_string())?;
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.with_experiment(cli.command.experiment()).map_err(|e| e.to_string())
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match resolve(&cli) {
        Ok(cfg) => run(&cfg),
        Err(msg) => config_failure(cli.out.as_deref().unwrap_or("out".as_ref()), &msg),
    };
    match report.status {
        Status::Passed => {
            if !cli.quiet {
                println!("{}", report.message);
                println!("wrote {} files to {}", report.files.len(), report.out_dir.display());
            }
        }
        Status::AssertionFailed => {
            eprintln!("assertion failed: {}", report.message);
            eprintln!("failing cases in {}", report.out_dir.join("failures.json").display());
        }
        Status::ConfigError | Status::SetupError => eprintln!("error: {}", report.message),
    }
    ExitCode::from(report.exit_code())
}
