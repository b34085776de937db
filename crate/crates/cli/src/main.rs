//! `polyspec`: quantum polyspectra experiments from the command line.
//!
//! ```text
//! polyspec run config.json --out results
//! polyspec run --preset two-spin-compare --format json --no-plots
//! polyspec presets                 # list embedded presets
//! polyspec presets zeno-sweep       # print one as JSON
//! ```
//!
//! Exit codes: 0 ok, 2 configuration error, 3 numerical failure.

mod config;
mod plot;
mod presets;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Format;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(polyspec::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn config(field: &str, reason: &str) -> Self {
        CliError::Config(format!("field `{field}`: {reason}"))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<polyspec::Error> for CliError {
    fn from(e: polyspec::Error) -> Self {
        match e {
            polyspec::Error::Io(io) => CliError::Output(io.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "polyspec", version, about = "Quantum polyspectra of measured open quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or an embedded preset.
    Run {
        /// Experiment config (JSON).
        #[arg(required_unless_present = "preset", conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Embedded preset instead of a config file.
        #[arg(long)]
        preset: Option<String>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the config's `output.dir`, else `out/<name>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Data file format.
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Skip the SVG plots.
        #[arg(long)]
        no_plots: bool,
    },
    /// List the embedded presets, or print one.
    Presets { name: Option<String> },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Presets { name: None } => {
            for p in presets::ALL {
                println!("{:<20} {}", p.name, p.about);
            }
            Ok(())
        }
        Command::Presets { name: Some(name) } => {
            print!("{}", presets::text(&name)?);
            Ok(())
        }
        Command::Run {
            config,
            preset,
            seed,
            out,
            format,
            no_plots,
        } => {
            let (text, origin) = match (&config, &preset) {
                (Some(path), _) => (
                    std::fs::read_to_string(path)
                        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?,
                    path.display().to_string(),
                ),
                (None, Some(name)) => (presets::text(name)?.to_string(), format!("preset {name}")),
                (None, None) => unreachable!("clap requires one of them"),
            };
            let mut cfg = config::parse(&text, &origin)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(f) = format {
                cfg.output.format = f;
            }
            if no_plots {
                cfg.output.plots = false;
            }
            let dir = out
                .or_else(|| cfg.output.dir.clone())
                .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
            let written = run::run(&cfg, &dir)?;
            eprintln!("wrote {} files to {}", written, dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polyspec: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
