use std::path::PathBuf;

use anyhow::Result;
use cascade_sim::{run_to_files, ExperimentConfig, Overrides};
use clap::Parser;

/// Run a cascading-bandit experiment described by a TOML file.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; the summary is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated policy names or kinds to run.
    #[arg(long)]
    policy: Option<String>,
    /// Number of rounds.
    #[arg(long = "T")]
    horizon: Option<u64>,
    /// `vanilla` or `exponential`.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    budget: Option<usize>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    cfg.apply(&Overrides {
        seed: cli.seed,
        output: cli.out,
        policy: cli.policy,
        horizon: cli.horizon,
        scenario: cli.scenario,
        budget: cli.budget,
    })?;
    let summary = run_to_files(&cfg)?;
    log::info!("finished {} rounds", summary.rounds);
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
