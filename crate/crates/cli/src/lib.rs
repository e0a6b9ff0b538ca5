//! Command-line front end: scenario files, subcommands, CSV output.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{Preset, ScenarioConfig};
pub use error::{CliError, Result};

const PRESET_HELP: &str = "\
Presets:
  paper-iv     alpha = (0.3 pi, 1.5, 0.9), gains in [0.01, 2]^3, 400 HVs,
               185-vehicle ring with one AV (bound, vstar, eig, simulate)
  appendix-g   same alpha, gains in [0.8, 2]^3, 27 HVs / 5 AVs,
               greedy placement of 5 AVs on a 32-vehicle ring (bound, place)
  sweep-upper  upper bound (i, i, i), i = 1..300, lower bound 0.01 (sweep)
  sweep-lower  lower bound 10^((i - 301)/25), i = 1..301, upper bound 2 (sweep)

Values in --config override the preset; flags override both.
Exit status: 0 ok, 1 usage, 2 infeasible bounds, 3 HVs never amplify, 4 compute failure.";

#[derive(Debug, Parser)]
#[command(name = "ringstab", version, about = "String-stability experiments on mixed-autonomy ring roads", after_help = PRESET_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Scenario file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Built-in scenario used as the base configuration.
    #[arg(long, value_enum, global = true)]
    pub preset: Option<Preset>,

    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Output directory [default: ./out].
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Optimal AV gains, margin J** and penetration-rate bound.
    Bound,
    /// J** along a grid of gain bounds.
    Sweep,
    /// Ring eigenmodes and the string-stability verdict.
    Eig,
    /// Linear ring response to an initial position offset.
    Simulate,
    /// AV placement by the window-norm measure.
    Place,
    /// Fewest AVs for the configured HV count via peak gains.
    Vstar,
}

/// Runs a parsed command line; returns the stdout summary.
pub fn run(cli: &Cli) -> Result<String> {
    let cfg = config::load(cli.preset, cli.config.as_deref())?;
    let out = cli
        .output_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let work = || -> Result<String> {
        Ok(match cli.command {
            Command::Bound => commands::cmd_bound(&cfg, &out)?.1,
            Command::Sweep => commands::cmd_sweep(&cfg, &out)?.1,
            Command::Eig => commands::cmd_eig(&cfg, &out)?.1,
            Command::Simulate => commands::cmd_simulate(&cfg, &out)?.1,
            Command::Place => commands::cmd_place(&cfg, &out)?.1,
            Command::Vstar => commands::cmd_vstar(&cfg, &out)?.1,
        })
    };
    match cli.jobs {
        Some(0) => Err(CliError::Usage("--jobs must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(work),
        None => work(),
    }
}
