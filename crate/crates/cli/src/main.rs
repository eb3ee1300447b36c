//! `arwlab`: runs activated random walk experiments and writes JSON-lines
//! records, CSV summaries and a metadata file.
//!
//! Exit codes: 0 on success (budget overruns are flagged in the records),
//! 1 for configuration or I/O errors, 2 when an invariant check fails.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;

use config::{Command, ExperimentConfig, Overrides};
use output::{write_metadata, Artifacts, Metadata};

#[derive(Parser, Debug)]
#[command(
    name = "arwlab",
    version,
    about = "Activated random walk simulation lab"
)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Flat TOML file; flags given on the command line win over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the merged configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Invariant(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Invariant(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "error: {m}"),
            CliError::Invariant(m) => write!(f, "invariant violated: {m}"),
        }
    }
}

impl From<arw_core::Error> for CliError {
    fn from(e: arw_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

fn merged_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let mut c = ExperimentConfig::load(path).map_err(CliError::Config)?;
            c.command = cli.command;
            c
        }
        None => ExperimentConfig::new(cli.command),
    };
    cli.overrides.clone().apply(&mut cfg);
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match merged_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.code());
        }
    };
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {threads} worker threads: {e}");
            return ExitCode::from(1);
        }
    };
    let started = now();
    let mut art = Artifacts::new(&cfg);
    let result = pool.install(|| commands::run(&cfg, &mut art));
    let code = result.as_ref().err().map_or(0, CliError::code);
    let dir = cfg.output_dir();
    let stem = cfg.command.name();
    // Records are written even when an invariant fails, so the failure can
    // be inspected.
    let written = if code == 1 {
        Ok(Vec::new())
    } else {
        art.write(&dir, stem).and_then(|mut w| {
            let meta = Metadata {
                version: env!("CARGO_PKG_VERSION"),
                command: stem,
                config_hash: cfg.hash(),
                threads,
                started_unix: started,
                finished_unix: now(),
                exit_code: code,
                config: &cfg,
            };
            w.push(write_metadata(&dir, stem, &meta)?);
            Ok(w)
        })
    };
    match written {
        Ok(paths) if !paths.is_empty() => {
            eprintln!(
                "{} records written to {}",
                art.records().len(),
                dir.display()
            );
        }
        Ok(_) => {}
        Err(e) => {
            eprintln!("error: writing output to {}: {e}", dir.display());
            return ExitCode::from(1);
        }
    }
    if let Err(e) = result {
        eprintln!("{e}");
    }
    ExitCode::from(code)
}
