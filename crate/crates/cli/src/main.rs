// SPDX-License-Identifier: Apache-2.0

//! `slowbond`: validate, evolve, simulate, compare and report campaigns.

mod compare;
mod config;
mod error;
mod evolve;
mod output;
mod report;
mod samples;
mod simulate;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use slowbond::BetaRegime;

use crate::config::CampaignConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "slowbond", version, about = "Slow-bond exclusion fluctuation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the membership, invariance, generator, continuity and gradnorm suites.
    Validate(CommonArgs),
    /// Sample `T_t H` on a grid.
    Evolve(CommonArgs),
    /// Simulate replicas and write the field samples.
    Simulate(CommonArgs),
    /// Confront sample files with the Ornstein-Uhlenbeck oracles.
    Compare(CommonArgs),
    /// Collect summary records from earlier runs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Campaign configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "SLOWBOND_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    /// Slow-bond exponent; `inf` freezes the bond.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Directories holding `summary.csv` files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Where `report.csv` goes; the first input when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Line,
    Robin,
    Neumann,
}

impl CommonArgs {
    /// The configured regime after `--regime`, `--beta` and `--alpha`.
    pub fn regime(&self, base: Option<BetaRegime>) -> Result<BetaRegime, CliError> {
        let (mut beta, mut alpha) = base.map_or((0.0, 1.0), |r| (r.beta(), r.alpha()));
        if let Some(r) = self.regime {
            beta = match r {
                RegimeArg::Line => 0.0,
                RegimeArg::Robin => 1.0,
                RegimeArg::Neumann => f64::INFINITY,
            };
        }
        beta = self.beta.unwrap_or(beta);
        alpha = self.alpha.unwrap_or(alpha);
        BetaRegime::new(beta, alpha).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn seed(&self, config: &CampaignConfig, fallback: u64) -> u64 {
        self.seed.or(config.seed).unwrap_or(fallback)
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    if let Command::Report(args) = &cli.command {
        return report::run(args);
    }
    let args = match &cli.command {
        Command::Validate(a) | Command::Evolve(a) | Command::Simulate(a) | Command::Compare(a) => a,
        Command::Report(_) => unreachable!("handled above"),
    };
    if let Some(workers) = args.workers {
        if workers == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let (config, _) = CampaignConfig::load(&args.config)?;
    match &cli.command {
        Command::Validate(a) => validate::run(a, &config),
        Command::Evolve(a) => evolve::run(a, &config),
        Command::Simulate(a) => simulate::run(a, &config),
        Command::Compare(a) => compare::run(a, &config),
        Command::Report(_) => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("slowbond: {e}");
            ExitCode::from(2)
        }
    }
}
