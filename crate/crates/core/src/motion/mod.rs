//! Inter-frame camera motion from sparse optical flow.
//!
//! [`estimate_motion`] chains corner detection on the previous frame,
//! pyramidal Lucas-Kanade into the current frame and a RANSAC fit of either an
//! affine map or a homography. It never fails: any problem along the way
//! yields [`CameraMotion::identity`] with zero inliers, so a tracker simply
//! falls back to static-box prediction for that frame.

pub mod features;
pub mod flow;
pub mod ransac;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::CameraMotion;
use crate::imaging::{build_pyramid, GrayFrame, Pyramid};

pub use features::{detect_features, FeatureSet};
pub use flow::{track_features, FlowMatches, FlowParams};
pub use ransac::{estimate_affine, estimate_homography, RansacParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotionError {
    #[error("motion configuration error: {0}")]
    Config(String),
    #[error("motion estimation failed: {0}")]
    EstimationFailed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technique {
    Affine,
    Homography,
}

impl std::str::FromStr for Technique {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "affine" | "aff" => Ok(Technique::Affine),
            "homography" | "hom" => Ok(Technique::Homography),
            other => Err(format!("unknown motion technique {other:?} (expected affine or homography)")),
        }
    }
}

impl std::fmt::Display for Technique {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Technique::Affine => "affine",
            Technique::Homography => "homography",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    pub technique: Technique,
    pub max_corners: usize,
    pub quality_level: f64,
    pub min_distance: f64,
    pub window: usize,
    pub levels: usize,
    pub max_iters: usize,
    pub eps: f64,
    pub ransac_threshold: f64,
    pub ransac_iters: usize,
    pub min_inliers: usize,
    pub ransac_confidence: f64,
    pub seed: u64,
    /// Integer factor by which frames are shrunk before estimation (1 = full resolution).
    pub downscale: usize,
}

impl Default for MotionConfig {
    fn default() -> Self {
        MotionConfig {
            technique: Technique::Affine,
            max_corners: 200,
            quality_level: 0.01,
            min_distance: 20.0,
            window: 10,
            levels: 3,
            max_iters: 30,
            eps: 0.01,
            ransac_threshold: 3.0,
            ransac_iters: 100,
            min_inliers: 10,
            ransac_confidence: 0.999,
            seed: 0,
            downscale: 1,
        }
    }
}

impl MotionConfig {
    pub fn flow_params(&self) -> FlowParams {
        FlowParams { window: self.window, max_iters: self.max_iters, eps: self.eps }
    }

    pub fn ransac_params(&self) -> RansacParams {
        RansacParams {
            threshold: self.ransac_threshold,
            iters: self.ransac_iters,
            min_inliers: self.min_inliers,
            confidence: self.ransac_confidence,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        let bad = |m: &str| Err(MotionError::Config(m.to_string()));
        if !(self.quality_level > 0.0 && self.quality_level < 1.0) {
            return bad("quality_level must lie in (0, 1)");
        }
        if self.min_distance < 0.0 || !self.min_distance.is_finite() {
            return bad("min_distance must be non-negative");
        }
        if self.window == 0 || self.levels == 0 || self.max_iters == 0 || !(self.eps > 0.0) {
            return bad("window, levels, max_iters and eps must be positive");
        }
        if !(self.ransac_threshold > 0.0) || self.ransac_iters == 0 {
            return bad("ransac_threshold and ransac_iters must be positive");
        }
        if !(0.0..1.0).contains(&self.ransac_confidence) {
            return bad("ransac_confidence must lie in [0, 1)");
        }
        if self.downscale == 0 {
            return bad("downscale must be at least 1");
        }
        Ok(())
    }
}

/// A fitted camera motion and its support.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionEstimate {
    pub motion: CameraMotion,
    pub inlier_count: usize,
    /// Inliers over successfully tracked matches.
    pub inlier_ratio: f64,
    /// Mean reprojection error over the inliers, in pixels.
    pub mean_reprojection_error: f64,
    /// Indices of the inliers among the successfully tracked matches.
    pub inliers: Vec<usize>,
}

impl MotionEstimate {
    pub fn identity() -> Self {
        MotionEstimate {
            motion: CameraMotion::identity(),
            inlier_count: 0,
            inlier_ratio: 0.0,
            mean_reprojection_error: 0.0,
            inliers: Vec::new(),
        }
    }
}

/// Estimates the motion mapping `prev` pixel coordinates into `curr`.
pub fn estimate_motion(prev: &GrayFrame, curr: &GrayFrame, cfg: &MotionConfig) -> MotionEstimate {
    let mut estimator = MotionEstimator::new(*cfg);
    estimator.estimate(prev, curr)
}

/// Motion estimation with the previous frame's pyramid cached between calls.
///
/// Feeding consecutive frames `(f0, f1), (f1, f2), ...` builds each pyramid once.
#[derive(Debug, Clone)]
pub struct MotionEstimator {
    cfg: MotionConfig,
    cache: Option<(GrayFrame, Pyramid)>,
}

impl MotionEstimator {
    pub fn new(cfg: MotionConfig) -> Self {
        MotionEstimator { cfg, cache: None }
    }

    pub fn config(&self) -> &MotionConfig {
        &self.cfg
    }

    pub fn estimate(&mut self, prev: &GrayFrame, curr: &GrayFrame) -> MotionEstimate {
        match self.try_estimate(prev, curr) {
            Ok(est) => est,
            Err(e) => {
                log::warn!("camera motion falls back to identity: {e}");
                MotionEstimate::identity()
            }
        }
    }

    fn try_estimate(&mut self, prev: &GrayFrame, curr: &GrayFrame) -> Result<MotionEstimate, MotionError> {
        let cfg = self.cfg;
        cfg.validate()?;
        if (prev.width(), prev.height()) != (curr.width(), curr.height()) {
            self.cache = None;
            return Err(MotionError::Config(format!(
                "frame sizes differ: {}x{} vs {}x{}",
                prev.width(),
                prev.height(),
                curr.width(),
                curr.height()
            )));
        }
        let shrink = |f: &GrayFrame| f.downscale(cfg.downscale).map_err(|e| MotionError::Config(e.to_string()));
        let (prev_s, curr_s) = if cfg.downscale > 1 { (shrink(prev)?, shrink(curr)?) } else { (prev.clone(), curr.clone()) };
        let levels = cfg.levels.min(Pyramid::max_levels(prev_s.width(), prev_s.height()));
        if levels == 0 {
            return Err(MotionError::Config(format!("frame {}x{} too small", prev_s.width(), prev_s.height())));
        }
        let pyramid = |f: &GrayFrame| build_pyramid(f, levels).map_err(|e| MotionError::Config(e.to_string()));

        let prev_pyr = match self.cache.take() {
            Some((frame, pyr)) if frame == prev_s && pyr.len() == levels => pyr,
            _ => pyramid(&prev_s)?,
        };
        let curr_pyr = pyramid(&curr_s)?;

        let features = detect_features(&prev_s, cfg.max_corners, cfg.quality_level, cfg.min_distance);
        let result = if features.is_empty() {
            Err(MotionError::EstimationFailed("no features in previous frame".into()))
        } else {
            track_features(&prev_pyr, &curr_pyr, features.points(), &cfg.flow_params()).and_then(|matches| {
                log::debug!("{} features, {} tracked", features.len(), matches.tracked_count());
                match cfg.technique {
                    Technique::Affine => estimate_affine(&matches, &cfg.ransac_params()),
                    Technique::Homography => estimate_homography(&matches, &cfg.ransac_params()),
                }
            })
        };
        self.cache = Some((curr_s, curr_pyr));

        let mut est = result?;
        if cfg.downscale > 1 {
            est.motion = est
                .motion
                .rescaled(cfg.downscale as f64)
                .map_err(|e| MotionError::EstimationFailed(e.to_string()))?;
            est.mean_reprojection_error *= cfg.downscale as f64;
        }
        Ok(est)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    fn texture(x: f64, y: f64) -> f64 {
        128.0 + 45.0 * (x * 0.13).sin() * (y * 0.11).cos() + 35.0 * (x * 0.037 - y * 0.061).sin()
            + 25.0 * (x * 0.29 + y * 0.07).cos()
    }

    fn render(w: usize, h: usize, world_to_view: &CameraMotion) -> GrayFrame {
        let inv = world_to_view.inverse().unwrap();
        GrayFrame::from_fn(w, h, |x, y| {
            let p = inv.apply(Point2::new(x as f64, y as f64)).unwrap();
            texture(p.x, p.y).round().clamp(0.0, 255.0) as u8
        })
        .unwrap()
    }

    #[test]
    fn same_frame_is_identity() {
        let f = render(320, 240, &CameraMotion::identity());
        let est = estimate_motion(&f, &f, &MotionConfig::default());
        let a = est.motion.affine_coefficients();
        assert!(est.inlier_count > 0);
        assert!(a[2].abs() < 0.1 && a[5].abs() < 0.1);
        assert!((a[0] - 1.0).abs() < 1e-3 && a[1].abs() < 1e-3 && a[3].abs() < 1e-3 && (a[4] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn recovers_known_warp() {
        let v0 = CameraMotion::identity();
        let v1 = CameraMotion::affine([1.005, 0.0, -6.0, 0.0, 1.005, 2.5]).unwrap();
        let (f0, f1) = (render(320, 240, &v0), render(320, 240, &v1));
        for technique in [Technique::Affine, Technique::Homography] {
            let cfg = MotionConfig { technique, ..MotionConfig::default() };
            let est = estimate_motion(&f0, &f1, &cfg);
            let probe = Point2::new(160.0, 120.0);
            let got = est.motion.apply(probe).unwrap();
            let want = v1.apply(probe).unwrap();
            assert!(got.distance(&want) < 0.5, "{technique}: {got:?} vs {want:?}");
        }
    }

    #[test]
    fn blank_frames_fall_back_to_identity() {
        let f = GrayFrame::filled(128, 128, 255).unwrap();
        let est = estimate_motion(&f, &f, &MotionConfig::default());
        assert!(est.motion.is_identity());
        assert_eq!(est.inlier_count, 0);
    }

    #[test]
    fn mismatched_sizes_fall_back_to_identity() {
        let a = render(128, 96, &CameraMotion::identity());
        let b = render(96, 128, &CameraMotion::identity());
        assert!(estimate_motion(&a, &b, &MotionConfig::default()).motion.is_identity());
    }

    #[test]
    fn downscaled_estimate_is_in_full_resolution_pixels() {
        let v1 = CameraMotion::translation(-8.0, 4.0);
        let (f0, f1) = (render(320, 240, &CameraMotion::identity()), render(320, 240, &v1));
        let cfg = MotionConfig { downscale: 2, min_inliers: 6, ..MotionConfig::default() };
        let est = estimate_motion(&f0, &f1, &cfg);
        let a = est.motion.affine_coefficients();
        assert!((a[2] + 8.0).abs() < 0.5 && (a[5] - 4.0).abs() < 0.5, "{a:?}");
    }

    #[test]
    fn technique_parses() {
        assert_eq!("Affine".parse::<Technique>().unwrap(), Technique::Affine);
        assert_eq!("homography".parse::<Technique>().unwrap(), Technique::Homography);
        assert!("orb".parse::<Technique>().is_err());
    }
}
