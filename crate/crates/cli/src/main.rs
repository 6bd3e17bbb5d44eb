// Copyright 2026 EA-Readout Contributors
// SPDX-License-Identifier: Apache-2.0

//! `readout`: protocol runs, fidelity sweeps, parameter optimization and
//! frequency planning.

mod axis;
mod config;
mod error;
mod freqplan;
mod optimize;
mod output;
mod run;
mod sweep;

use clap::{error::ErrorKind, Args, Parser, Subcommand};
use config::{ProtocolChoice, RunConfig};
use error::{CliError, EXIT_OK, EXIT_USAGE};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "readout", version, about = "Pulsed parametric qubit readout simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(value_name = "CONFIG")]
    config_path: Option<PathBuf>,
    #[arg(long, value_name = "PATH", conflicts_with = "config_path")]
    config: Option<PathBuf>,
    /// Output directory (overrides output.directory).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one protocol and write trajectory, report and summary.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        protocol: Option<ProtocolChoice>,
    },
    /// Fidelity over a photon-budget by total-time grid for both protocols.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Photon budget axis `lo:hi:steps[:log|:lin]`.
        #[arg(long, default_value = "1:100:20:log", value_parser = axis::parse)]
        ntot: axis::Axis,
        /// Total time axis in μs, same syntax.
        #[arg(long, default_value = "0.1:10:20:log", value_parser = axis::parse)]
        time: axis::Axis,
    },
    /// Penalized optimization of the EA parameters.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Maximum number of objective evaluations.
        #[arg(long, default_value_t = 200)]
        budget: usize,
        /// Objective weights `lambda1,lambda2` on D² and gain.
        #[arg(long, default_value = "1,0", value_parser = optimize::parse_weights)]
        weights: (f64, f64),
    },
    /// Search or check a multiplexed frequency plan.
    Freqplan {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Band `lo:hi` in GHz.
        #[arg(long, value_parser = freqplan::parse_band)]
        band: Option<(f64, f64)>,
        /// Guard separation in MHz.
        #[arg(long, default_value_t = 50.0)]
        guard: f64,
        /// Validate this comma-separated list (GHz) instead of searching.
        #[arg(long, value_delimiter = ',')]
        check: Option<Vec<f64>>,
    },
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match self.config.as_ref().or(self.config_path.as_ref()) {
            Some(p) => config::load_config(p)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.output.directory = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { common, protocol } => {
            let mut cfg = common.load()?;
            if let Some(p) = protocol {
                cfg.protocol = p;
            }
            run::cmd_run(&cfg)
        }
        Command::Sweep { common, ntot, time } => {
            let cfg = common.load()?;
            sweep::cmd_sweep(&cfg, &ntot, &time, common.jobs as usize)
        }
        Command::Optimize { common, budget, weights } => {
            let cfg = common.load()?;
            optimize::cmd_optimize(&cfg, budget, weights)
        }
        Command::Freqplan {
            common,
            n,
            band,
            guard,
            check,
        } => {
            let cfg = common.load()?;
            freqplan::cmd_freqplan(&cfg, n, band, guard, check)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
