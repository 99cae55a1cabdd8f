use std::fmt;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use camtrack::imaging::{load_frame, GrayFrame};
use camtrack::mot::SequenceLayout;
use camtrack::motion::Technique;
use camtrack::tracker::{Tracker, TrackerConfig};
use clap::Args;

use crate::track::tracker_config;
use crate::{CliError, TrackerOptions};

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Sequence directory.
    pub sequence: PathBuf,
    /// Passes over the sequence per technique.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Only time the configured technique instead of both.
    #[arg(long)]
    pub single: bool,
    #[command(flatten)]
    pub options: TrackerOptions,
}

pub const STAGES: [&str; 5] = ["motion", "predict", "associate", "update", "total"];

/// Per-frame latency distribution for each stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageStats {
    pub median: Duration,
    pub p95: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TechniqueBench {
    pub technique: Technique,
    pub frames: usize,
    pub repeats: usize,
    /// Aligned with [`STAGES`].
    pub stages: Vec<StageStats>,
    pub fps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub runs: Vec<TechniqueBench>,
}

/// Nearest-rank percentile of an unsorted sample.
pub fn percentile(samples: &[Duration], q: f64) -> Duration {
    if samples.is_empty() {
        return Duration::ZERO;
    }
    let mut v = samples.to_vec();
    v.sort_unstable();
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Times `repeats` full passes of a fresh tracker over preloaded frames.
pub fn bench_frames(
    frames: &[GrayFrame],
    detections: &[Vec<camtrack::Detection>],
    cfg: &TrackerConfig,
    repeats: usize,
) -> Result<TechniqueBench, CliError> {
    let mut samples: Vec<Vec<Duration>> = vec![Vec::new(); STAGES.len()];
    let mut wall = Duration::ZERO;
    for _ in 0..repeats.max(1) {
        let mut tracker = Tracker::new(*cfg)?;
        for (k, frame) in frames.iter().enumerate() {
            let prev = if k > 0 { Some(&frames[k - 1]) } else { None };
            let started = Instant::now();
            tracker.step(prev, frame, &detections[k]);
            let elapsed = started.elapsed();
            wall += elapsed;
            let t = tracker.last_timings();
            for (s, d) in samples.iter_mut().zip([t.motion, t.predict, t.associate, t.update, elapsed]) {
                s.push(d);
            }
        }
    }
    let total_frames = frames.len() * repeats.max(1);
    Ok(TechniqueBench {
        technique: cfg.motion.technique,
        frames: frames.len(),
        repeats: repeats.max(1),
        stages: samples.iter().map(|s| StageStats { median: percentile(s, 0.5), p95: percentile(s, 0.95) }).collect(),
        fps: if wall.is_zero() { f64::INFINITY } else { total_frames as f64 / wall.as_secs_f64() },
    })
}

pub fn run(args: &BenchArgs) -> Result<BenchReport, CliError> {
    let layout = SequenceLayout::open(&args.sequence)?;
    let cfg = tracker_config(&layout, &args.options)?;
    let detections = layout.load_detections()?;
    let frames = layout.frames.iter().map(load_frame).collect::<Result<Vec<_>, _>>()?;
    let techniques = if args.single {
        vec![cfg.motion.technique]
    } else {
        vec![Technique::Affine, Technique::Homography]
    };
    let mut runs = Vec::new();
    for technique in techniques {
        let mut c = cfg;
        c.motion.technique = technique;
        runs.push(bench_frames(&frames, &detections, &c, args.repeats)?);
    }
    Ok(BenchReport { runs })
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        for run in &self.runs {
            writeln!(f, "{} ({} frames x {} repeats)", run.technique, run.frames, run.repeats)?;
            writeln!(f, "  {:<10} {:>10} {:>10}", "stage", "median_ms", "p95_ms")?;
            for (name, s) in STAGES.iter().zip(&run.stages) {
                writeln!(f, "  {name:<10} {:>10.3} {:>10.3}", ms(s.median), ms(s.p95))?;
            }
            writeln!(f, "  fps {:.2}", run.fps)?;
        }
        Ok(())
    }
}
