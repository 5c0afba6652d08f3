//! `mmsounder` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

mod commands;
mod config;
mod demo;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "mmsounder", version, about = "Switched-array mmWave channel sounder twin")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Generate the multitone sounding waveform and report its PAPR.
    Waveform,
    /// Generate a switching codebook with its timestamps.
    Codebook,
    /// Simulate a measurement of a scene: CIR tensor, PDP and PAS.
    Simulate,
    /// Estimate multipath parameters from a CIR tensor and track them.
    Estimate,
    /// Evaluate the receiver link budget.
    Budget,
    /// Doppler ambiguity function of a switching schedule.
    Ambiguity,
    /// Track azimuth of arrival across stored estimates.
    Track,
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    CliError { code: 2, message: msg.into() }.into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<CliError>() {
        return e.code;
    }
    if let Some(e) = err.downcast_ref::<mmsounder::Error>() {
        return if e.is_input_error() { 2 } else { 3 };
    }
    2
}

pub struct Context {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn })
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let ctx = Context { config: cli.config, seed: cli.seed, out: cli.out };
    let result = match cli.command {
        Command::Waveform => commands::waveform(&ctx),
        Command::Codebook => commands::codebook(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Estimate => commands::estimate(&ctx),
        Command::Budget => commands::budget(&ctx),
        Command::Ambiguity => commands::ambiguity(&ctx),
        Command::Track => commands::track(&ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
