use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use ptstring_cli::commands::{self, RunContext};
use ptstring_cli::config::ScenarioConfig;

#[derive(Parser)]
#[command(name = "ptstring", version, about = "Prescribed-time boundary control of a string with a tip mass")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario config (TOML); the reference configuration when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overriding `output.dir`
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Also render SVG line plots
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the kernel and inverse kernel and report agreement with the series oracle
    Kernel,
    /// Run the configured scenario (open, closed, target, baseline or sweep)
    Simulate,
    /// Compare prescribed-time and frozen-gain closed loops
    Compare,
    /// Run the verification suite; exits 1 if any check fails
    Verify,
}

fn run(cli: Cli) -> Result<bool> {
    let config = match &cli.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    let out = cli.out.clone().unwrap_or_else(|| config.output.dir.clone());
    let ctx = RunContext { config, out, svg: cli.svg };
    match cli.command {
        Command::Kernel => {
            let r = commands::run_kernel(&ctx)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Command::Simulate => {
            let v = commands::run_simulate(&ctx)?;
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
        Command::Compare => {
            let r = commands::run_compare(&ctx)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Command::Verify => return commands::run_verify(&ctx),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
