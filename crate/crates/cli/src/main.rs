//! `igahc`: batch driver for the coupled solver studies.
//!
//! Exit codes: 0 success, 1 gate failure, 2 configuration error, 3 numerical failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{RunConfig, Study};
use output::OutDir;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{} gate(s) failed:\n  {}", .0.len(), .0.join("\n  "))]
    Gates(Vec<String>),

    #[error(transparent)]
    Numerical(igahc::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Gates(_) => 1,
            CliError::Usage(_) | CliError::Config { .. } => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<igahc::Error> for CliError {
    fn from(e: igahc::Error) -> Self {
        match e {
            igahc::Error::Config { field, message } => CliError::Config { field, message },
            igahc::Error::Parse(message) => CliError::config("config", message),
            igahc::Error::NoHarmonics { .. } => CliError::config("max_order", e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "igahc", version, about = "Isogeometric magnetostatics with harmonic stator-rotor coupling")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML); study defaults apply when omitted.
    #[arg(long, global = true, env = "IGAHC_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory; overrides `out` in the config file.
    #[arg(long, global = true, env = "IGAHC_OUT")]
    out: Option<PathBuf>,

    /// Worker threads for independent sub-runs.
    #[arg(long, global = true, env = "IGAHC_THREADS")]
    threads: Option<usize>,

    /// Reserved; every study is deterministic.
    #[arg(long, global = true, env = "IGAHC_SEED")]
    seed: Option<u64>,

    /// Log progress to stderr.
    #[arg(short, long, global = true, env = "IGAHC_VERBOSE")]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Manufactured-solution convergence on the quarter ring.
    Verify,
    /// Inf-sup constant over refinement levels and harmonic orders.
    Infsup,
    /// One coupled solve with harmonic coupling, DN, or both.
    Solve,
    /// Flux linkage sweep over one pole pitch, EMF spectrum and THD.
    Emf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let study = match cli.command {
        Command::Verify => Study::Verify,
        Command::Infsup => Study::InfSup,
        Command::Solve => Study::Solve,
        Command::Emf => Study::Emf,
    };
    let cfg = RunConfig::load(study, cli.config.as_deref())?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Some(seed) = cli.seed {
        log::debug!("seed {seed} ignored");
    }
    let root = cli.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let out = OutDir::create(&root)?;
    log::info!("{} study, output in {}", study.name(), root.display());
    let failed = match study {
        Study::Verify => commands::verify(&cfg, &out)?,
        Study::InfSup => commands::infsup(&cfg, &out)?,
        Study::Solve => commands::solve(&cfg, &out)?,
        Study::Emf => commands::emf(&cfg, &out)?,
    };
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Gates(failed))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .parse_env("IGAHC_LOG")
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("igahc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
