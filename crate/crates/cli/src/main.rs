//! `spectomo`: command-line pipeline for spectroscopic optical tomography.
//!
//! Every subcommand reads one TOML config (plus `--set key=value` overrides) and writes its
//! outputs and a `manifest.json` into a run directory.
//!
//! Exit codes: 0 success, 1 invalid config or input, 2 numerical failure, 3 budget exceeded.

mod commands;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigError;
use crate::run::RunDir;

#[derive(Parser)]
#[command(name = "spectomo", version, about = "Spectroscopic optical tomography pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, short)]
    config: PathBuf,
    /// Override a config key, e.g. `--set geometry.nx=32` or `--set recon.regularizer=l1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Run directory; defaults to `runs/<command>`.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build (or load from the cache) the kernel table for the configured geometry.
    KernelBuild(Common),
    /// Write the spectral library as CSV.
    SynthSpectra(Common),
    /// Simulate measurements of a phantom.
    Simulate(Common),
    /// Reconstruct species densities from a measurements CAST file.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        input: PathBuf,
    },
    /// Run the identifiability audits on selected transverse frequencies.
    AuditUniqueness(Common),
    /// Singular values of the system blocks.
    SvScan(Common),
    /// Best/worst singular-value envelopes over random spectra draws.
    SvEnsemble(Common),
    /// Render a densities CAST file to PGM/PPM images.
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        input: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::KernelBuild(_) => "kernel-build",
            Command::SynthSpectra(_) => "synth-spectra",
            Command::Simulate(_) => "simulate",
            Command::Reconstruct { .. } => "reconstruct",
            Command::AuditUniqueness(_) => "audit-uniqueness",
            Command::SvScan(_) => "sv-scan",
            Command::SvEnsemble(_) => "sv-ensemble",
            Command::Render { .. } => "render",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::KernelBuild(c)
            | Command::SynthSpectra(c)
            | Command::Simulate(c)
            | Command::AuditUniqueness(c)
            | Command::SvScan(c)
            | Command::SvEnsemble(c) => c,
            Command::Reconstruct { common, .. } | Command::Render { common, .. } => common,
        }
    }
}

fn execute(command: &Command) -> anyhow::Result<()> {
    let common = command.common();
    let config = config::load(&common.config, &common.overrides)?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(command.name()));
    let mut run = RunDir::create(&out, command.name(), &config)?;
    run.record_input(&common.config)?;
    match command {
        Command::KernelBuild(_) => commands::kernel_build(&config, run),
        Command::SynthSpectra(_) => commands::synth_spectra(&config, run),
        Command::Simulate(_) => commands::simulate(&config, run),
        Command::Reconstruct { input, .. } => commands::reconstruct(&config, input, run),
        Command::AuditUniqueness(_) => commands::audit(&config, run),
        Command::SvScan(_) => commands::sv_scan_cmd(&config, run),
        Command::SvEnsemble(_) => commands::sv_ensemble_cmd(&config, run),
        Command::Render { input, .. } => commands::render(&config, input, run),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<spectomo::Error>() {
        Some(spectomo::Error::Numerical(_)) => 2,
        Some(spectomo::Error::Budget(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
