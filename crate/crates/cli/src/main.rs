use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use cyclelab::lab::{run_pipeline, ExperimentConfig, Pipeline, SystemSpec};

/// Limit-cycle experiments on planar polynomial vector fields.
#[derive(Debug, Parser)]
#[command(name = "cyclelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Locate cycles on the section and estimate their multiplicities.
    Find(Args),
    /// Split a stable odd-multiplicity cycle with `X + λ F ∇F`.
    Split(Args),
    /// Sweep the rotated family and tabulate Φ.
    Rotate(Args),
    /// Minimal Bernstein degree for a derivative tolerance.
    Bernstein(Args),
    /// Build and verify a trapping annulus.
    Annulus(Args),
    /// Random coefficient perturbations of the system and their Φ census.
    Q2(Args),
}

#[derive(Debug, clap::Args)]
struct Args {
    /// TOML experiment file; without it the defaults for CK(3) are used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Command {
    fn split(self) -> (Pipeline, Args) {
        match self {
            Command::Find(a) => (Pipeline::Find, a),
            Command::Split(a) => (Pipeline::SplitTheorem1, a),
            Command::Rotate(a) => (Pipeline::RotateTheorem2, a),
            Command::Bernstein(a) => (Pipeline::BernsteinStudy, a),
            Command::Annulus(a) => (Pipeline::Annulus, a),
            Command::Q2(a) => (Pipeline::Q2Search, a),
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let (pipeline, args) = cli.command.split();
    let mut cfg = match &args.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.pipeline != pipeline {
                bail!("{} sets pipeline = \"{}\" but the subcommand runs {pipeline}", path.display(), cfg.pipeline);
            }
            cfg
        }
        None => ExperimentConfig::new(pipeline, SystemSpec::Named("CK(3)".into())),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output = Some(out);
    }
    cfg.validate()?;
    let output = run_pipeline(&cfg);
    let report = &output.report;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for e in &report.errors {
        eprintln!("error: {e}");
    }
    for c in &report.census {
        println!(
            "cycle xi = {:+.10e} radius = {:.8} period = {:.8} exponent = {:+.6e}{}",
            c.xi,
            c.radius,
            c.period,
            c.exponent,
            c.multiplicity.map(|d| format!(" multiplicity = {d}")).unwrap_or_default()
        );
    }
    if let Some(dir) = &cfg.output {
        let files = output.write(dir).with_context(|| format!("writing {}", dir.display()))?;
        println!("wrote {} to {}", files.join(", "), dir.display());
    }
    println!("finished in {:.2} s", report.wall_clock_seconds);
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
