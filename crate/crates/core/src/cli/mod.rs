//! Command-line front end.

pub mod commands;
pub mod report;
pub mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

pub use report::{sha256_hex, Artifact, ReportBundle};

use crate::config::{parse_config, RunConfig};
use crate::error::{Error, Result};

/// Evanescent-field nanoparticle sensing simulator.
#[derive(Debug, Parser)]
#[command(name = "ecfsense", version, about)]
pub struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "ECFSENSE_WORKERS")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Guided modes of the configured cross-section(s).
    Modes,
    /// Evanescent profile of the fundamental mode.
    Profile,
    /// Signal amplitude against particle radius.
    Scaling,
    /// Particle transits, synthesized photocurrent and its demodulation.
    Trace,
    /// Demodulate, normalize and detect events.
    Detect,
    /// Noise PSD against LO power.
    Noisefit,
    /// Brownian transit envelope and ground truth.
    Transit,
    /// A command's artifacts plus an SVG plot.
    Figure {
        #[arg(value_enum)]
        target: Target,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Modes,
    Profile,
    Scaling,
    Trace,
    Detect,
    Noisefit,
    Transit,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Modes => "modes",
            Target::Profile => "profile",
            Target::Scaling => "scaling",
            Target::Trace => "trace",
            Target::Detect => "detect",
            Target::Noisefit => "noisefit",
            Target::Transit => "transit",
        }
    }
}

/// Loads the config and applies command-line overrides.
pub fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => {
            let mut c = RunConfig::default();
            c.resolve()?;
            c
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<ReportBundle> {
    Ok(match command {
        Command::Modes => commands::modes(cfg)?,
        Command::Profile => commands::profile(cfg)?.0,
        Command::Scaling => commands::scaling(cfg)?.0,
        Command::Trace => commands::trace(cfg)?.0,
        Command::Detect => commands::detect(cfg)?.0,
        Command::Noisefit => commands::noisefit(cfg)?.0,
        Command::Transit => commands::transit(cfg)?,
        Command::Figure { target } => commands::figure(cfg, target)?,
    })
}

/// Parses the config, runs the command on a worker pool and writes the bundle.
pub fn run(cli: &Cli) -> Result<ReportBundle> {
    let cfg = load_config(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::invalid("workers", "must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    let bundle = pool.install(|| execute(cli.command, &cfg))?;
    bundle.write(&cfg.output)?;
    Ok(bundle)
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(bundle) => {
            let out = load_config(&cli).map(|c| c.output).unwrap_or_default();
            eprintln!(
                "wrote {} artifacts to {}",
                bundle.artifacts.len() + 2,
                out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
