//! Command-line front end: config parsing, subcommand dispatch and result
//! files. The binary in `main.rs` is a thin wrapper around [`run`].

// `!(x <= tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{parse_config, Format, RunConfig};
use error::CliError;
use output::{write_all, Provenance};

#[derive(Debug, Parser)]
#[command(name = "vibronica", version, about = "Opto-vibronic spectra, populations and cavity transmission")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for scans; defaults to the available cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output format; overrides `output.formats`.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand, Clone)]
pub enum Command {
    /// Franck-Condon weights of emission and absorption.
    Fc,
    /// Absorption and emission spectra, analytic against numeric.
    Spectrum {
        /// Scale each spectrum to unit peak.
        #[arg(long)]
        normalize: bool,
    },
    /// Steady excited population over a laser scan.
    Population {
        /// Add the sublevel ladder steady state and its relaxation run.
        #[arg(long)]
        ladder: bool,
    },
    /// Cavity transmission over a laser scan, with polariton modes.
    Cavity,
    /// Stationary vibrational correlation function.
    Correlate,
    /// Two-dimensional scan: laser frequency against a second parameter.
    Sweep,
    /// Print the resolved configuration with defaults filled in.
    Config,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fc => "fc",
            Command::Spectrum { .. } => "spectrum",
            Command::Population { .. } => "population",
            Command::Cavity => "cavity",
            Command::Correlate => "correlate",
            Command::Sweep => "sweep",
            Command::Config => "config",
        }
    }
}

/// What a run produced.
#[derive(Debug)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
}

/// Runs one subcommand against a parsed config.
pub fn run_with_config(cmd: &Command, cfg: &RunConfig, common: &Common) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = common.jobs {
        if j == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    let mut prov = Provenance::new(cmd.name(), cfg);
    let artifacts = match cmd {
        Command::Fc => commands::fc(cfg, &mut prov)?,
        Command::Spectrum { normalize } => commands::spectrum(cfg, &mut prov, &pool, *normalize)?,
        Command::Population { ladder } => commands::population(cfg, &mut prov, &pool, *ladder)?,
        Command::Cavity => commands::cavity_scan(cfg, &mut prov, &pool)?,
        Command::Correlate => commands::correlate(cfg, &mut prov)?,
        Command::Sweep => commands::sweep(cfg, &mut prov, &pool)?,
        Command::Config => Vec::new(),
    };
    prov.wall_time_s = started.elapsed().as_secs_f64();
    let dir = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let formats = common.format.map_or_else(|| cfg.output.formats.clone(), |f| vec![f]);
    let mut files = write_all(&dir, &artifacts, &prov, &formats, cfg.output.plot_scripts)?;
    let resolved = dir.join("config.resolved.json");
    std::fs::write(&resolved, resolved_json(cfg))?;
    files.push(resolved);
    Ok(RunReport {
        files,
        notes: prov.notes,
    })
}

pub fn resolved_json(cfg: &RunConfig) -> String {
    let mut s = serde_json::to_string_pretty(cfg).expect("config serializes");
    s.push('\n');
    s
}

/// Parses the config named on the command line and runs the subcommand.
pub fn run(cli: &Cli) -> Result<RunReport, CliError> {
    let path = cli
        .common
        .config
        .as_ref()
        .ok_or_else(|| CliError::usage("--config <path> is required"))?;
    let cfg = parse_config(path)?;
    if let Command::Config = cli.command {
        print!("{}", resolved_json(&cfg));
        return Ok(RunReport {
            files: Vec::new(),
            notes: Vec::new(),
        });
    }
    run_with_config(&cli.command, &cfg, &cli.common)
}
