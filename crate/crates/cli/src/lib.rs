//! Command-line harness around `remle-core`.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{run, CliError, Command, ExperimentKind, Overrides};
pub use config::{parse_config, resolve_seed, ConfigError, RunConfig, SEED_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "sde-remle",
    version,
    about = "Simulate, fit and study mixed-effects SDE models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,

    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Overrides the config file and SDE_REMLE_SEED.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads. Never changes results.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Simulate an ensemble and write paths.csv and stats.csv.
    Simulate,
    /// Fit the MLE to ingested (`input`) or simulated paths.
    Fit,
    /// Run a Monte Carlo experiment.
    Experiment {
        #[arg(value_enum)]
        kind: KindArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Consistency,
    Normality,
    Noniid,
    Continuity,
}

impl Cli {
    pub fn command(&self) -> Command {
        match self.command {
            CliCommand::Simulate => Command::Simulate,
            CliCommand::Fit => Command::Fit,
            CliCommand::Experiment { kind } => Command::Experiment(match kind {
                KindArg::Consistency => ExperimentKind::Consistency,
                KindArg::Normality => ExperimentKind::Normality,
                KindArg::Noniid => ExperimentKind::Noniid,
                KindArg::Continuity => ExperimentKind::Continuity,
            }),
        }
    }
}

/// Loads the config and runs the command on a pool of `--threads` workers.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run(cli.command(), cfg, &overrides))
}
