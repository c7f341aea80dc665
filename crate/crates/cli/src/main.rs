//! `aoisched`: information-freshness metrics, index tables, threshold solving
//! and scheduling simulation from JSON run configs.
//!
//! Exit codes: 0 success, 1 computation error, 2 input error.

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aoi_sched::{Error, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::commands::Output;
use crate::config::{load, Loaded};

#[derive(Debug, Parser)]
#[command(name = "aoisched", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the config's base seed (`simulate`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the config's replication count (`simulate`).
    #[arg(long, global = true)]
    replications: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Inference error versus AoI from a time series, with its monotone decomposition.
    Metrics,
    /// Gittins index table `delta,gittins`.
    Gittins,
    /// Optimal thresholds per buffer offset and the best offset.
    Threshold {
        /// Cross-check against relative value iteration.
        #[arg(long)]
        oracle: bool,
    },
    /// Whittle indices `l,b,delta,whittle` for every source and offset.
    Whittle,
    /// Simulate policies and write `policy,source,metric,value,stderr`.
    Simulate {
        /// Also write the per-slot trace of the first run here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    match &cli.command {
        Command::Metrics => {
            let cfg = load(path)?;
            emit(cli, &cfg, commands::metrics(&cfg)?)
        }
        Command::Gittins => {
            let cfg = load(path)?;
            emit(cli, &cfg, commands::gittins(&cfg)?)
        }
        Command::Threshold { oracle } => {
            let cfg = load(path)?;
            emit(cli, &cfg, commands::threshold(&cfg, *oracle)?)
        }
        Command::Whittle => {
            let cfg = load(path)?;
            emit(cli, &cfg, commands::whittle(&cfg)?)
        }
        Command::Simulate { trace } => {
            let mut cfg: Loaded<config::SimulateConfig> = load(path)?;
            if let Some(seed) = cli.seed {
                cfg.config.seed = seed;
            }
            if let Some(n) = cli.replications {
                cfg.config.replications = n;
            }
            let out = commands::simulate(&cfg, trace.as_deref())?;
            emit(cli, &cfg, out)
        }
    }
}

fn emit<T: Serialize>(cli: &Cli, cfg: &Loaded<T>, out: Output) -> Result<()> {
    let mut text = format!("# config_sha256={}\n", cfg.digest());
    text.push_str(&out.body);
    for note in &out.notes {
        text.push_str(&format!("# {note}\n"));
        eprintln!("{note}");
    }
    write_out(cli.out.as_deref(), text.as_bytes())
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => match std::io::stdout().write_all(bytes) {
            // a closed downstream pipe (`| head`) is not a failure
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => r.map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
        },
    }
}
