//! Command-line front end: `track`, `eval`, `synth` and `bench`.
//!
//! Each subcommand is also callable as a function so tests can drive it
//! without spawning a process.

use std::path::PathBuf;

use camtrack::config::{Config, ConfigError};
use camtrack::imaging::ImageError;
use camtrack::metrics::MetricsError;
use camtrack::mot::MotError;
use camtrack::motion::Technique;
use camtrack::synth::SynthError;
use camtrack::tracker::TrackerError;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub mod bench;
pub mod eval;
pub mod prefetch;
pub mod synth;
pub mod track;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or missing input data; exit code 1.
    #[error("{0}")]
    Input(String),
    /// Bad configuration; exit code 2.
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Config(_) => 2,
        }
    }
}

impl From<MotError> for CliError {
    fn from(e: MotError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<TrackerError> for CliError {
    fn from(e: TrackerError) -> Self {
        match e {
            TrackerError::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "camtrack", version, about = "Camera-motion-compensated multi-object tracker")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track a sequence directory and write a MOT result file.
    Track(track::TrackArgs),
    /// Score a result file against ground truth.
    Eval(eval::EvalArgs),
    /// Write a synthetic sequence directory.
    Synth(synth::SynthArgs),
    /// Time the tracking stages over repeated runs.
    Bench(bench::BenchArgs),
}

/// Tracker settings: a config file plus per-key overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct TrackerOptions {
    /// Config file (`[tracker]`, `[motion]`, `[noise]` sections).
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// RANSAC seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub technique: Option<Technique>,
    #[arg(long)]
    pub max_age: Option<usize>,
    #[arg(long)]
    pub min_hits: Option<usize>,
    #[arg(long)]
    pub iou_threshold: Option<f64>,
    #[arg(long)]
    pub min_confidence: Option<f64>,
    /// Also report tracks that missed their detection this frame.
    #[arg(long)]
    pub emit_coasting: bool,
    /// Integer factor frames are shrunk by before motion estimation.
    #[arg(long)]
    pub downscale: Option<usize>,
}

impl TrackerOptions {
    /// File values with command-line overrides applied.
    pub fn resolve(&self) -> Result<Config, CliError> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        let t = &mut cfg.tracker;
        if let Some(v) = self.seed {
            t.motion.seed = v;
        }
        if let Some(v) = self.technique {
            t.motion.technique = v;
        }
        if let Some(v) = self.max_age {
            t.max_age = v;
        }
        if let Some(v) = self.min_hits {
            t.min_hits = v;
        }
        if let Some(v) = self.iou_threshold {
            t.iou_threshold = v;
        }
        if let Some(v) = self.min_confidence {
            t.min_confidence = v;
        }
        if self.emit_coasting {
            t.emit_coasting = true;
        }
        if let Some(v) = self.downscale {
            t.motion.downscale = v;
        }
        t.validate()?;
        Ok(cfg)
    }
}

/// Runs a parsed command, writing reports to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Track(args) => {
            let report = track::run(&args)?;
            print!("{report}");
        }
        Command::Eval(args) => {
            let report = eval::run(&args)?;
            println!("{report}");
            println!();
            print!("{}", report.to_key_values());
        }
        Command::Synth(args) => {
            let layout = synth::run(&args)?;
            println!("wrote {} frames to {}", layout.info.seq_length, layout.root.display());
        }
        Command::Bench(args) => {
            let report = bench::run(&args)?;
            print!("{report}");
        }
    }
    Ok(())
}
