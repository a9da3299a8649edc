//! `quasimode run --config <path> --out <dir> [--only <stage>] [--ladder-top <k>]`

use anyhow::Context;
use clap::{Parser, Subcommand};
use quasimode_core::experiment::{
    init_threads_from_env, run_experiment, write_outputs, ExperimentConfig, RunOptions, Stage,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "quasimode",
    version,
    about = "Quasimode construction and solvability-ratio experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment over its lambda ladder and write norms.csv, curves.csv and report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Stop after this stage: geometry, eikonal, transport, quasimode or norms.
        #[arg(long)]
        only: Option<Stage>,
        /// Keep only ladder values up to 2^k.
        #[arg(long = "ladder-top")]
        ladder_top: Option<i32>,
    },
}

fn run(
    config: PathBuf,
    out: PathBuf,
    only: Option<Stage>,
    ladder_top: Option<i32>,
) -> anyhow::Result<i32> {
    init_threads_from_env()?;
    let cfg =
        ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
    let report = run_experiment(&cfg, &RunOptions { only, ladder_top })?;
    write_outputs(&report, &out).with_context(|| format!("writing to {}", out.display()))?;
    for rec in &report.records {
        match (&rec.norms, &rec.error) {
            (_, Some(e)) => println!("lambda = {:<8} error: {e}", rec.lambda),
            (Some(n), None) => println!(
                "lambda = {:<8} ||u||_-N = {:.4e}  ||Qu||_nu = {:.4e}  ||Au|| = {:.4e}  ratio = {:.4e}",
                rec.lambda, n.norm_minus_n, n.residual_nu, n.cutoff_norm, n.ratio
            ),
            (None, None) => println!("lambda = {:<8} ok", rec.lambda),
        }
    }
    for c in &report.checks {
        println!(
            "{} {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    Ok(report.exit_code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let Command::Run {
        config,
        out,
        only,
        ladder_top,
    } = cli.command;
    match run(config, out, only, ladder_top) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
