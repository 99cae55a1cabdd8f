use std::fmt;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use camtrack::mot::{write_results, SequenceLayout};
use camtrack::tracker::{FrameOutput, StageTimings, Tracker, TrackerConfig};
use clap::Args;
use log::info;

use crate::prefetch::{Prefetch, DEFAULT_CAPACITY};
use crate::{CliError, TrackerOptions};

#[derive(Debug, Clone, Args)]
pub struct TrackArgs {
    /// Sequence directory (img1/, det/det.txt, seqinfo.ini).
    pub sequence: PathBuf,
    /// Result file to write.
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub options: TrackerOptions,
}

/// Stage totals over one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackReport {
    pub frames: usize,
    pub decode: Duration,
    pub motion: Duration,
    pub predict: Duration,
    pub associate: Duration,
    pub update: Duration,
    /// Tracking wall time: everything except decoding and detection.
    pub tracking: Duration,
}

impl TrackReport {
    fn add(&mut self, t: &StageTimings) {
        self.motion += t.motion;
        self.predict += t.predict;
        self.associate += t.associate;
        self.update += t.update;
    }

    pub fn fps(&self) -> f64 {
        let secs = self.tracking.as_secs_f64();
        if secs > 0.0 {
            self.frames as f64 / secs
        } else {
            f64::INFINITY
        }
    }
}

impl fmt::Display for TrackReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.frames.max(1) as f64;
        writeln!(f, "{:<10} {:>10} {:>12}", "stage", "total_ms", "per_frame_ms")?;
        for (name, d) in [
            ("decode", self.decode),
            ("motion", self.motion),
            ("predict", self.predict),
            ("associate", self.associate),
            ("update", self.update),
        ] {
            let ms = d.as_secs_f64() * 1e3;
            writeln!(f, "{name:<10} {ms:>10.2} {:>12.3}", ms / n)?;
        }
        writeln!(f, "frames {}", self.frames)?;
        writeln!(f, "fps {:.2} (excluding decode and detection)", self.fps())
    }
}

/// Tracker settings for `layout`, with the filter step taken from its frame rate.
pub fn tracker_config(layout: &SequenceLayout, options: &TrackerOptions) -> Result<TrackerConfig, CliError> {
    let cfg = options.resolve()?.tracker_for_frame_rate(layout.info.frame_rate);
    cfg.validate()?;
    Ok(cfg)
}

/// Tracks every frame of `layout`, returning per-frame outputs and timings.
pub fn track_layout(layout: &SequenceLayout, cfg: &TrackerConfig) -> Result<(Vec<FrameOutput>, TrackReport), CliError> {
    let detections = layout.load_detections()?;
    let mut tracker = Tracker::new(*cfg)?;
    let mut report = TrackReport::default();
    let mut outputs = Vec::with_capacity(layout.frames.len());
    let mut prev = None;
    let (w, h) = (layout.info.im_width, layout.info.im_height);
    for item in Prefetch::spawn(layout.frames.clone(), DEFAULT_CAPACITY) {
        let decoded = item?;
        if (decoded.frame.width(), decoded.frame.height()) != (w, h) {
            return Err(CliError::Input(format!(
                "{}: frame is {}x{}, seqinfo.ini says {w}x{h}",
                layout.frames[decoded.index].display(),
                decoded.frame.width(),
                decoded.frame.height()
            )));
        }
        report.decode += decoded.decode_time;
        let started = Instant::now();
        outputs.push(tracker.step(prev.as_ref(), &decoded.frame, &detections[decoded.index]));
        report.tracking += started.elapsed();
        report.add(&tracker.last_timings());
        prev = Some(decoded.frame);
    }
    report.frames = outputs.len();
    if report.frames != layout.frames.len() {
        return Err(CliError::Input(format!("decoded {} of {} frames", report.frames, layout.frames.len())));
    }
    Ok((outputs, report))
}

pub fn run(args: &TrackArgs) -> Result<TrackReport, CliError> {
    let layout = SequenceLayout::open(&args.sequence)?;
    let cfg = tracker_config(&layout, &args.options)?;
    info!("tracking {} ({} frames, {} motion)", layout.info.name, layout.info.seq_length, cfg.motion.technique);
    let (outputs, report) = track_layout(&layout, &cfg)?;
    write_results(&args.out, &outputs)?;
    Ok(report)
}
