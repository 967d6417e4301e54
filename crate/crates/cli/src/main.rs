//! `tonks`: strong-coupling spectra of few trapped fermions from the command line.

mod pipeline;
mod record;
mod settings;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use settings::{Command, Settings};

#[derive(Debug, Parser)]
#[command(name = "tonks", version, about = "Strong-coupling spectra of few fermions in a 1D trap")]
struct Cli {
    /// TOML config; top-level keys apply to every subcommand, `[spectrum]` etc. override them.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Omit the timestamp so identical inputs give identical bytes.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Boundary weights, sector Laplacian and K spectrum.
    Spectrum(Settings),
    /// Boundary weights only.
    Gamma(Settings),
    /// Spectrum compared with slopes fitted to exact diagonalization (N <= 3).
    Validate(Settings),
    /// Spectrum plus the one-body density of one projected eigenstate.
    Density(Settings),
}

fn execute(cli: Cli) -> Result<bool> {
    let (command, flags) = match cli.command {
        Sub::Spectrum(s) => (Command::Spectrum, s),
        Sub::Gamma(s) => (Command::Gamma, s),
        Sub::Validate(s) => (Command::Validate, s),
        Sub::Density(s) => (Command::Density, s),
    };
    let merged = match &cli.config {
        Some(path) => settings::load_file(path, command)?.overlay(&flags),
        None => flags,
    };
    let job = settings::resolve(command, merged)?;
    if let Some(t) = cli.threads {
        anyhow::ensure!(t > 0, "threads must be positive");
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let outcome = pipeline::run(&job, !cli.no_timestamp)?;
    let bytes = record::render(&outcome.record, job.format)?;
    match &job.output {
        Some(path) => record::write_atomic(path, &bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    if let Some(v) = &outcome.record.validation {
        for r in &v.states {
            eprintln!(
                "[{}] state {}: K = {:.6}, fitted {:.6} ± {:.6} (band {:.6})",
                if r.pass { "PASS" } else { "FAIL" },
                r.index,
                r.predicted,
                r.fitted,
                r.uncertainty,
                r.band
            );
        }
    }
    Ok(outcome.all_pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
