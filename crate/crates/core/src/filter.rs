//! Box Kalman filter with camera-motion-compensated prediction.
//!
//! The state is the box itself, `[x_c, y_c, w, h]`, and the measurement is the
//! full state (`H = I`). Prediction maps the center through the camera motion
//! and keeps width and height fixed; there are no velocity terms.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, CameraMotion, GeometryError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("prediction failed: {0}")]
    PredictionFailed(#[from] GeometryError),
    #[error("innovation covariance is not invertible")]
    SingularInnovation,
    #[error("invalid noise configuration: {0}")]
    InvalidNoise(String),
}

/// Noise factors and frame period.
///
/// `Q = diag(sigma_q^2) * delta_t` and `R = diag(sigma_r^2) * delta_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma_q: f64,
    pub sigma_r: f64,
    pub delta_t: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { sigma_q: 0.05, sigma_r: 0.00625, delta_t: 0.033 }
    }
}

impl NoiseConfig {
    /// Frame period for a given frame rate, rounded to milliseconds (30 FPS -> 0.033).
    pub fn delta_t_for(fps: f64) -> f64 {
        (1000.0 / fps).round() / 1000.0
    }

    pub fn for_frame_rate(fps: f64) -> Self {
        NoiseConfig { delta_t: Self::delta_t_for(fps), ..NoiseConfig::default() }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        for (name, v) in [("sigma_q", self.sigma_q), ("sigma_r", self.sigma_r), ("delta_t", self.delta_t)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FilterError::InvalidNoise(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn process_noise(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal_element(self.sigma_q * self.sigma_q * self.delta_t)
    }

    pub fn measurement_noise(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal_element(self.sigma_r * self.sigma_r * self.delta_t)
    }

    pub fn initial_covariance(&self) -> Matrix4<f64> {
        self.measurement_noise() * 10.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackState {
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
}

impl TrackState {
    pub fn bbox(&self) -> Result<BBox, GeometryError> {
        BBox::new(self.mean[0], self.mean[1], self.mean[2], self.mean[3])
    }

    /// True when the covariance admits a Cholesky factorization.
    pub fn is_positive_definite(&self) -> bool {
        self.covariance.cholesky().is_some()
    }

    pub fn symmetry_error(&self) -> f64 {
        (self.covariance - self.covariance.transpose()).abs().max()
    }
}

pub fn init_state(det: &BBox, cfg: &NoiseConfig) -> TrackState {
    TrackState { mean: Vector4::from(det.to_array()), covariance: cfg.initial_covariance() }
}

/// Propagates the state through the camera motion.
pub fn predict(s: &TrackState, m: &CameraMotion, cfg: &NoiseConfig) -> Result<TrackState, FilterError> {
    let c = crate::geometry::Point2::new(s.mean[0], s.mean[1]);
    let moved = m.apply(c)?;
    let j2 = m.jacobian_at(c)?;
    let mut j = Matrix4::identity();
    j.fixed_view_mut::<2, 2>(0, 0).copy_from(&j2);

    let mut mean = s.mean;
    mean[0] = moved.x;
    mean[1] = moved.y;
    let covariance = symmetrize(j * s.covariance * j.transpose() + cfg.process_noise());
    Ok(TrackState { mean, covariance })
}

/// Corrects the state with a measured box.
pub fn update(s: &TrackState, z: &BBox, cfg: &NoiseConfig) -> Result<TrackState, FilterError> {
    let r = cfg.measurement_noise();
    let p = &s.covariance;
    let innovation_cov = p + r;
    let inv = innovation_cov.try_inverse().ok_or(FilterError::SingularInnovation)?;
    let gain = p * inv;
    let innovation = Vector4::from(z.to_array()) - s.mean;
    let mean = s.mean + gain * innovation;
    let i_k = Matrix4::identity() - gain;
    let covariance = symmetrize(i_k * p * i_k.transpose() + gain * r * gain.transpose());
    Ok(TrackState { mean, covariance })
}

fn symmetrize(p: Matrix4<f64>) -> Matrix4<f64> {
    (p + p.transpose()) * 0.5
}
