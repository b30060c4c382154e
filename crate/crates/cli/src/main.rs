//! `teasq` — experiment runner for the asynchronous federated-learning
//! simulator in `teasq-core`.
//!
//! Any flag of the form `--section.key=value` (dots in the name) is a
//! config override; unknown single-word `--key=value` flags override
//! top-level config fields. They are extracted before clap parsing, so the
//! subcommands below only declare the structural flags.

mod commands;
mod config_file;
mod idx;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CommonOpts;
use config_file::Override;

#[derive(Parser)]
#[command(
    name = "teasq",
    version,
    about = "Deterministic simulator for asynchronous federated learning with \
             staleness-aware aggregation and compressed transfers",
    after_help = "Config overrides: append --section.key=value flags (e.g. \
                  --compute.phi_min=1e4, --compression.p_s=25). Precedence: \
                  CLI > grid > file. Env: TEASQ_DATA_DIR, TEASQ_OUT_DIR."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config file (.toml, or a previous run's run.json)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: $TEASQ_OUT_DIR or ./runs, plus a derived name)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory holding file-backed datasets (default: $TEASQ_DATA_DIR or ./data)
    #[arg(long, alias = "data_dir")]
    data_dir: Option<PathBuf>,
    /// Protocol shorthand: teasq | tea | teastatic | fedavg | fedasync
    #[arg(long)]
    protocol: Option<String>,
    /// Seed shorthand (same as --seed=N)
    #[arg(long)]
    seed: Option<u64>,
    /// Compression kind shorthand: none | static | schedule-file | auto-tune
    #[arg(long)]
    compression: Option<String>,
    /// Replay a tuned schedule.json (implies --compression schedule-file)
    #[arg(long, alias = "schedule_file")]
    schedule_file: Option<PathBuf>,
    /// Suppress the human-readable progress lines
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write metrics.csv, run.json, summary.json
    Run {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run every point of a parameter grid and write an index.csv
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Grid axis, repeatable: --grid key=v1,v2,v3 (Cartesian product)
        #[arg(long = "grid")]
        grid: Vec<String>,
    },
    /// Resolve an auto-tune compression schedule and write schedule.json
    Tune {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Parse, merge, and validate a config without running it
    ValidateConfig {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Flags clap owns; any other `--name=value` is a config override.
const KNOWN_FLAGS: &[&str] = &[
    "config",
    "out",
    "data-dir",
    "data_dir",
    "protocol",
    "seed",
    "compression",
    "schedule-file",
    "schedule_file",
    "quiet",
    "grid",
    "help",
    "version",
];

/// Splits argv into clap's share and the dotted/unknown `--key=value`
/// overrides, preserving order within each.
fn extract_overrides(args: impl Iterator<Item = String>) -> (Vec<String>, Vec<Override>) {
    let mut forward = Vec::new();
    let mut overrides = Vec::new();
    for arg in args {
        let candidate = arg
            .strip_prefix("--")
            .filter(|rest| {
                rest.split_once('=').is_some_and(|(name, _)| {
                    !name.is_empty() && (name.contains('.') || !KNOWN_FLAGS.contains(&name))
                })
            })
            .and_then(|rest| Override::parse(rest).ok());
        match candidate {
            Some(o) => overrides.push(o),
            None => forward.push(arg),
        }
    }
    (forward, overrides)
}

fn common_opts(common: CommonArgs, overrides: Vec<Override>) -> CommonOpts {
    CommonOpts {
        config: common.config,
        out: common.out,
        data_dir: common.data_dir,
        protocol: common.protocol,
        seed: common.seed,
        compression: common.compression,
        schedule_file: common.schedule_file,
        quiet: common.quiet,
        overrides,
    }
}

fn main() -> ExitCode {
    let (forward, overrides) = extract_overrides(std::env::args());
    let cli = Cli::parse_from(forward);
    let result = match cli.command {
        Command::Run { common } => commands::cmd_run(&common_opts(common, overrides)),
        Command::Sweep { common, grid } => {
            commands::cmd_sweep(&common_opts(common, overrides), &grid)
        }
        Command::Tune { common } => commands::cmd_tune(&common_opts(common, overrides)),
        Command::ValidateConfig { common } => {
            commands::cmd_validate(&common_opts(common, overrides))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // machine-readable single-line error on stderr
            eprintln!("{}", serde_json::json!({ "error": format!("{e:#}") }));
            ExitCode::FAILURE
        }
    }
}
