use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use hyperid::config::RunConfig;
use hyperid::pipeline::{run_reconstruct, run_simulate};
use hyperid::verify::{run_suite, Suite};

/// Damage identification in hyperelastic plates from wave data.
#[derive(Parser)]
#[command(name = "hyperid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic data and reconstruct the dictionary coefficients.
    Reconstruct { config: PathBuf },
    /// Forward solve only; writes sensor and displacement CSVs.
    Simulate { config: PathBuf },
    /// Run a property suite: material, adjoint, taylor, cone or all.
    Verify { suite: String },
    /// Write a runnable config for scenario A, B or C.
    Scenario {
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Reconstruct { config } => {
            let rec = run_reconstruct(&config).with_context(|| format!("reconstruct {}", config.display()))?;
            let r = &rec.record;
            println!(
                "{} iterations ({:?}), omega {}, residual {:.4e} -> {:.4e}",
                r.iterations,
                r.stop_reason,
                r.omega,
                r.residuals.first().copied().unwrap_or(f64::NAN),
                r.residuals.last().copied().unwrap_or(f64::NAN),
            );
        }
        Command::Simulate { config } => {
            run_simulate(&config).with_context(|| format!("simulate {}", config.display()))?;
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let checks = run_suite(suite)?;
            for c in &checks {
                println!("{c}");
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
        Command::Scenario { name, out } => {
            let cfg = RunConfig::for_scenario(&name)?;
            std::fs::write(&out, serde_json::to_string_pretty(&cfg)? + "\n")
                .with_context(|| format!("write {}", out.display()))?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
