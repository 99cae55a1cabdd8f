//! Tracking-by-detection for scenes where the objects stand still and the camera moves.
//!
//! Each frame, the camera motion between consecutive images is estimated from
//! sparse optical flow (Shi-Tomasi corners tracked with pyramidal Lucas-Kanade,
//! then a robust affine or homography fit). Every track is a Kalman filter over
//! `[x_c, y_c, w, h]` whose prediction step pushes the box center through that
//! motion and leaves the size alone. Predicted boxes are matched to detections
//! by IoU with the Hungarian algorithm.
//!
//! The crate also ships the pieces needed to check a tracker end to end:
//! CLEAR-MOT, identity and HOTA metrics ([`metrics`]), MOTChallenge file I/O
//! ([`mot`]) and a deterministic synthetic sequence generator ([`synth`]).
//!
//! ```
//! use camtrack::geometry::{BBox, CameraMotion};
//! use camtrack::filter::{init_state, predict, NoiseConfig};
//!
//! let cfg = NoiseConfig::default();
//! let state = init_state(&BBox::new(100.0, 100.0, 40.0, 60.0)?, &cfg);
//! let pan = CameraMotion::translation(-3.0, 0.0);
//! let next = predict(&state, &pan, &cfg)?;
//! assert_eq!(next.bbox()?.x_c(), 97.0);
//! assert_eq!(next.bbox()?.w(), 40.0);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod association;
pub mod config;
pub mod filter;
pub mod geometry;
pub mod imaging;
pub mod metrics;
pub mod mot;
pub mod motion;
pub mod synth;
pub mod tracker;

pub use geometry::{iou, BBox, CameraMotion, MotionKind, Point2};
pub use imaging::GrayFrame;
pub use tracker::{Detection, FrameOutput, Tracker, TrackerConfig};

// Every Rust snippet in the guide under `book/` runs as a doctest.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/camera-motion.md")]
    mod camera_motion {}
    #[doc = include_str!("../../../book/src/kalman-filter.md")]
    mod kalman_filter {}
    #[doc = include_str!("../../../book/src/association.md")]
    mod association {}
    #[doc = include_str!("../../../book/src/tracker.md")]
    mod tracker {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
}
