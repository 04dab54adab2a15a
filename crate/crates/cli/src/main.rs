//! `chronos`: solve clock interrogation SDPs, compute bounds, refine
//! estimate sets and chain interrogations from JSON configs or presets.

// `!(x > 0.0)` style guards are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod presets;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Command, Context};
use config::{Overrides, RunConfig};
use error::CliError;

/// Overrides the solver's relative gap tolerance.
const TOL_ENV: &str = "CHRONOS_SDP_TOL";

#[derive(Parser)]
#[command(name = "chronos", version, about = "Optimal clock interrogation protocols")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Run config (JSON); exclusive with --preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named experiment preset; see `chronos presets`.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Offset seed for bounds and comparisons.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Number of random discretization offsets.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Oracle discretization size.
    #[arg(long, global = true)]
    d: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one discretization and reconstruct the protocol.
    Solve,
    /// Lower and upper bounds over random offsets, plus a CSV row.
    Bounds,
    /// Iteratively move the estimates to their posterior statistics.
    Refine,
    /// Classically chained interrogations with Bayes updates.
    Chain,
    /// List preset names.
    Presets,
}

fn gap_override() -> Result<Option<f64>, CliError> {
    match std::env::var(TOL_ENV) {
        Ok(v) => match v.trim().parse::<f64>() {
            Ok(t) if t > 0.0 => Ok(Some(t)),
            _ => Err(CliError::Config(format!("{TOL_ENV}={v} is not a positive number"))),
        },
        Err(_) => Ok(None),
    }
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let command = match cli.command {
        Cmd::Presets => {
            // a closed pipe (`chronos presets | head`) is not an error
            let _ = writeln!(std::io::stdout(), "{}", presets::names().join("\n"));
            return Ok(true);
        }
        Cmd::Solve => Command::Solve,
        Cmd::Bounds => Command::Bounds,
        Cmd::Refine => Command::Refine,
        Cmd::Chain => Command::Chain,
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    }
    let overrides = Overrides { seed: cli.seed, k: cli.k, d: cli.d, gap_tol: gap_override()? };
    let (name, runs) = match (&cli.config, &cli.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let label = path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
            // an echoed `<command>-<label>.config.json` reruns under its own label
            let label = label.strip_suffix(".config").map_or(label.clone(), |l| {
                let cmd = ["solve-", "bounds-", "refine-", "chain-"].iter().find(|p| l.starts_with(*p));
                cmd.map_or(l, |p| &l[p.len()..]).to_string()
            });
            (label.clone(), vec![(label, RunConfig::from_json(&text)?)])
        }
        (None, Some(name)) => {
            let p = presets::preset(name)?;
            (p.name, p.runs)
        }
        _ => return Err(CliError::Config("give exactly one of --config and --preset".into())),
    };
    let ctx = Context { out: cli.out, overrides, name };
    commands::run(command, runs, &ctx)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("chronos: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
