//! Track lifecycle and the per-frame pipeline.
//!
//! Each step estimates the camera motion since the previous frame, predicts
//! every live track through it, assigns detections by IoU, updates matched
//! tracks, spawns tracks for leftover detections and retires tracks that
//! have gone unmatched for too long.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::association::{build_cost_matrix, solve_assignment};
use crate::filter::{init_state, predict, update, NoiseConfig, TrackState};
use crate::geometry::{BBox, CameraMotion};
use crate::imaging::{GrayFrame, ImageError};
use crate::motion::{MotionConfig, MotionEstimate, MotionEstimator};

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("invalid tracker configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub confidence: f64,
}

impl Detection {
    pub fn new(bbox: BBox, confidence: f64) -> Self {
        Detection { bbox, confidence }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: u64,
    pub state: TrackState,
    /// Frames with a matched detection, the spawning one included.
    pub hits: usize,
    pub hit_streak: usize,
    pub time_since_update: usize,
    pub age: usize,
    pub status: TrackStatus,
    /// Confidence of the most recent matched detection.
    pub confidence: f64,
    /// Excluded from association this frame because prediction failed.
    #[serde(default)]
    pub prediction_failed: bool,
}

impl Track {
    pub fn bbox(&self) -> Option<BBox> {
        self.state.bbox().ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// A track dies once it has gone more than this many frames without a match.
    pub max_age: usize,
    /// Consecutive matches needed to confirm a track.
    pub min_hits: usize,
    /// Minimum IoU for an accepted assignment.
    pub iou_threshold: f64,
    /// Detections below this confidence are ignored.
    pub min_confidence: f64,
    /// Also report confirmed tracks that were predicted but not matched this frame.
    pub emit_coasting: bool,
    pub noise: NoiseConfig,
    pub motion: MotionConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            max_age: 10,
            min_hits: 3,
            iou_threshold: 0.3,
            min_confidence: 0.3,
            emit_coasting: false,
            noise: NoiseConfig::default(),
            motion: MotionConfig::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        if self.max_age < 1 || self.min_hits < 1 {
            return Err(TrackerError::Config("max_age and min_hits must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(TrackerError::Config(format!("iou_threshold {} outside [0, 1]", self.iou_threshold)));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(TrackerError::Config(format!("min_confidence {} outside [0, 1]", self.min_confidence)));
        }
        self.noise.validate().map_err(|e| TrackerError::Config(e.to_string()))?;
        self.motion.validate().map_err(|e| TrackerError::Config(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub id: u64,
    pub bbox: BBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameOutput {
    /// 0-based frame index.
    pub frame_index: usize,
    pub entries: Vec<OutputEntry>,
}

/// Wall-clock time spent in each stage of one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub motion: Duration,
    pub predict: Duration,
    pub associate: Duration,
    pub update: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.motion + self.predict + self.associate + self.update
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tracker {
    cfg: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u64,
    frame_index: usize,
    #[serde(skip)]
    runtime: Runtime,
}

#[derive(Debug, Clone, Default)]
struct Runtime {
    estimator: Option<MotionEstimator>,
    last_motion: Option<MotionEstimate>,
    timings: StageTimings,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self, TrackerError> {
        cfg.validate()?;
        Ok(Tracker { cfg, tracks: Vec::new(), next_id: 1, frame_index: 0, runtime: Runtime::default() })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Live tracks, in spawn order.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Index of the next frame to be processed.
    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn last_motion(&self) -> Option<&MotionEstimate> {
        self.runtime.last_motion.as_ref()
    }

    pub fn last_timings(&self) -> StageTimings {
        self.runtime.timings
    }

    /// Processes one frame; `prev` is `None` only for the first frame.
    pub fn step(&mut self, prev: Option<&GrayFrame>, curr: &GrayFrame, detections: &[Detection]) -> FrameOutput {
        let started = Instant::now();
        let estimate = match prev {
            Some(prev) => {
                let cfg = self.cfg.motion;
                let estimator = self.runtime.estimator.get_or_insert_with(|| MotionEstimator::new(cfg));
                estimator.estimate(prev, curr)
            }
            None => MotionEstimate::identity(),
        };
        let motion_time = started.elapsed();
        let motion = estimate.motion;
        self.runtime.last_motion = Some(estimate);
        let out = self.step_with_motion(&motion, detections);
        self.runtime.timings.motion = motion_time;
        out
    }

    /// Processes one frame with an externally supplied camera motion.
    pub fn step_with_motion(&mut self, motion: &CameraMotion, detections: &[Detection]) -> FrameOutput {
        let mut timings = StageTimings::default();

        let t = Instant::now();
        for track in &mut self.tracks {
            track.age += 1;
            match predict(&track.state, motion, &self.cfg.noise) {
                Ok(s) => {
                    track.state = s;
                    track.prediction_failed = false;
                }
                Err(e) => {
                    log::warn!("track {}: {e}", track.id);
                    track.prediction_failed = true;
                }
            }
        }
        timings.predict = t.elapsed();

        let t = Instant::now();
        let dets: Vec<&Detection> = detections.iter().filter(|d| d.confidence >= self.cfg.min_confidence).collect();
        let candidates: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| !self.tracks[i].prediction_failed && self.tracks[i].bbox().is_some())
            .collect();
        let track_boxes: Vec<BBox> = candidates.iter().filter_map(|&i| self.tracks[i].bbox()).collect();
        let det_boxes: Vec<BBox> = dets.iter().map(|d| d.bbox).collect();
        let assignment = solve_assignment(&build_cost_matrix(&track_boxes, &det_boxes), self.cfg.iou_threshold);
        timings.associate = t.elapsed();

        let t = Instant::now();
        let mut matched = vec![false; self.tracks.len()];
        for &(ti, di) in &assignment.matches {
            let idx = candidates[ti];
            let det = dets[di];
            let track = &mut self.tracks[idx];
            match update(&track.state, &det.bbox, &self.cfg.noise) {
                Ok(s) if s.bbox().is_ok() => track.state = s,
                Ok(_) => track.state = init_state(&det.bbox, &self.cfg.noise),
                Err(e) => {
                    log::warn!("track {}: {e}; reinitialising from detection", track.id);
                    track.state = init_state(&det.bbox, &self.cfg.noise);
                }
            }
            track.hits += 1;
            track.hit_streak += 1;
            track.time_since_update = 0;
            track.confidence = det.confidence;
            if track.status == TrackStatus::Tentative && track.hit_streak >= self.cfg.min_hits {
                track.status = TrackStatus::Confirmed;
            }
            matched[idx] = true;
        }
        for (track, _) in self.tracks.iter_mut().zip(&matched).filter(|(_, &m)| !m) {
            track.time_since_update += 1;
            track.hit_streak = 0;
            if track.time_since_update > self.cfg.max_age {
                track.status = TrackStatus::Dead;
            }
        }
        self.tracks.retain(|t| t.status != TrackStatus::Dead);

        for &di in &assignment.unmatched_detections {
            let det = dets[di];
            let status = if self.cfg.min_hits <= 1 { TrackStatus::Confirmed } else { TrackStatus::Tentative };
            self.tracks.push(Track {
                id: self.next_id,
                state: init_state(&det.bbox, &self.cfg.noise),
                hits: 1,
                hit_streak: 1,
                time_since_update: 0,
                age: 1,
                status,
                confidence: det.confidence,
                prediction_failed: false,
            });
            self.next_id += 1;
        }
        timings.update = t.elapsed();

        let entries = self
            .tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed)
            .filter(|t| t.time_since_update == 0 || self.cfg.emit_coasting)
            .filter_map(|t| t.bbox().map(|bbox| OutputEntry { id: t.id, bbox, confidence: t.confidence }))
            .collect();
        let out = FrameOutput { frame_index: self.frame_index, entries };
        self.frame_index += 1;
        self.runtime.timings = timings;
        out
    }
}

/// Random-access source of frames, indexed from 0.
pub trait FrameSource {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Frames are requested in increasing index order.
    fn frame(&mut self, index: usize) -> Result<GrayFrame, ImageError>;
}

impl FrameSource for Vec<GrayFrame> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn frame(&mut self, index: usize) -> Result<GrayFrame, ImageError> {
        self.get(index).cloned().ok_or_else(|| ImageError::InvalidFrame(format!("no frame {index}")))
    }
}

/// Runs a fresh tracker over a whole sequence.
pub fn run_sequence<S: FrameSource + ?Sized>(
    frames: &mut S,
    detections: &[Vec<Detection>],
    cfg: &TrackerConfig,
) -> Result<Vec<FrameOutput>, TrackerError> {
    if frames.len() != detections.len() {
        return Err(TrackerError::Input(format!(
            "{} frames but detections for {} frames",
            frames.len(),
            detections.len()
        )));
    }
    let mut tracker = Tracker::new(*cfg)?;
    let mut prev: Option<GrayFrame> = None;
    let mut outputs = Vec::with_capacity(frames.len());
    for (k, dets) in detections.iter().enumerate() {
        let curr = frames.frame(k)?;
        outputs.push(tracker.step(prev.as_ref(), &curr, dets));
        prev = Some(curr);
    }
    Ok(outputs)
}
