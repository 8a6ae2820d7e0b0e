//! `cpctl`: batch driver for controllability experiments.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use commands::Failure;
use config::{ExperimentConfig, Overrides};

/// Run one experiment described by a JSON config.
#[derive(Parser, Debug)]
#[command(name = "cpctl", version)]
struct Cli {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides numeric.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides numeric.steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Overrides numeric.theta.
    #[arg(long)]
    theta: Option<f64>,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| Failure::Config(vec![format!("{}: {e}", cli.config.display())]))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| Failure::Config(vec![format!("{}: {e}", cli.config.display())]))?;
    cfg.apply(&Overrides { output: cli.out.clone(), seed: cli.seed, steps: cli.steps, theta: cli.theta });
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match load(&cli).and_then(|cfg| commands::run(&cfg)) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Failure::Config(errs)) => {
            eprintln!("config error:");
            for e in errs {
                eprintln!("  {e}");
            }
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
