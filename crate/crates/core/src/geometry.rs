//! Boxes, points and inter-frame camera transforms.
//!
//! Boxes live in center/size form. The MOT file layer converts to and from
//! left/top/width/height at the I/O boundary.

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest homogeneous denominator accepted when projecting through a homography.
pub const MIN_PROJECTIVE_DENOMINATOR: f64 = 1e-9;

const MIN_DETERMINANT: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid box: center ({x_c}, {y_c}) size {w}x{h}")]
    InvalidBox { x_c: f64, y_c: f64, w: f64, h: f64 },
    #[error("non-finite transform coefficient")]
    NonFinite,
    #[error("transform is singular (determinant {0:e})")]
    Singular(f64),
    #[error("degenerate projection: homogeneous denominator {0:e}")]
    DegenerateProjection(f64),
}

/// A point in pixel coordinates, y pointing down.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned box in center/size form with strictly positive extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct BBox {
    x_c: f64,
    y_c: f64,
    w: f64,
    h: f64,
}

#[derive(Serialize, Deserialize)]
struct RawBox {
    x_c: f64,
    y_c: f64,
    w: f64,
    h: f64,
}

impl TryFrom<RawBox> for BBox {
    type Error = GeometryError;

    fn try_from(r: RawBox) -> Result<Self, Self::Error> {
        BBox::new(r.x_c, r.y_c, r.w, r.h)
    }
}

impl From<BBox> for RawBox {
    fn from(b: BBox) -> Self {
        RawBox { x_c: b.x_c, y_c: b.y_c, w: b.w, h: b.h }
    }
}

impl BBox {
    pub fn new(x_c: f64, y_c: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        let finite = x_c.is_finite() && y_c.is_finite() && w.is_finite() && h.is_finite();
        if !finite || w <= 0.0 || h <= 0.0 {
            return Err(GeometryError::InvalidBox { x_c, y_c, w, h });
        }
        Ok(BBox { x_c, y_c, w, h })
    }

    /// Builds a box from MOT-style left/top/width/height.
    pub fn from_ltwh(left: f64, top: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        BBox::new(left + w / 2.0, top + h / 2.0, w, h)
    }

    /// Builds a box from its corner coordinates.
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        BBox::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)
    }

    pub fn x_c(&self) -> f64 {
        self.x_c
    }

    pub fn y_c(&self) -> f64 {
        self.y_c
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.x_c, self.y_c)
    }

    pub fn left(&self) -> f64 {
        self.x_c - self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.y_c - self.h / 2.0
    }

    pub fn right(&self) -> f64 {
        self.x_c + self.w / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.y_c + self.h / 2.0
    }

    /// `[left, top, width, height]`.
    pub fn to_ltwh(&self) -> [f64; 4] {
        [self.left(), self.top(), self.w, self.h]
    }

    /// `[x_c, y_c, w, h]`, the filter state layout.
    pub fn to_array(&self) -> [f64; 4] {
        [self.x_c, self.y_c, self.w, self.h]
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn with_center(&self, c: Point2) -> Result<Self, GeometryError> {
        BBox::new(c.x, c.y, self.w, self.h)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = self.right().min(other.right()) - self.left().max(other.left());
        let ih = self.bottom().min(other.bottom()) - self.top().max(other.top());
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        iou(self, other)
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MotionKind {
    Identity,
    Affine,
    Homography,
}

/// Transform taking previous-frame pixel coordinates to current-frame ones.
///
/// Stored as a row-major 3x3 matrix. Affine motions keep `[0, 0, 1]` as the
/// last row; homographies are scaled so that the bottom-right entry is 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraMotion {
    kind: MotionKind,
    m: [f64; 9],
}

impl Default for CameraMotion {
    fn default() -> Self {
        CameraMotion::identity()
    }
}

impl CameraMotion {
    pub const fn identity() -> Self {
        CameraMotion {
            kind: MotionKind::Identity,
            m: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        }
    }

    /// Affine motion from `[a11, a12, a13, a21, a22, a23]`.
    pub fn affine(a: [f64; 6]) -> Result<Self, GeometryError> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let det = a[0] * a[4] - a[1] * a[3];
        if det.abs() < MIN_DETERMINANT {
            return Err(GeometryError::Singular(det));
        }
        Ok(CameraMotion {
            kind: MotionKind::Affine,
            m: [a[0], a[1], a[2], a[3], a[4], a[5], 0.0, 0.0, 1.0],
        })
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        CameraMotion::affine([1.0, 0.0, tx, 0.0, 1.0, ty]).expect("translation is invertible")
    }

    /// Homography from a row-major 3x3 matrix; rescaled so `h33 = 1`.
    pub fn homography(h: [f64; 9]) -> Result<Self, GeometryError> {
        if h.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if h[8].abs() < MIN_DETERMINANT {
            return Err(GeometryError::Singular(h[8]));
        }
        let s = h[8];
        let mut m = h.map(|v| v / s);
        m[8] = 1.0;
        let det = Matrix3::from_row_slice(&m).determinant();
        if !det.is_finite() || det.abs() < MIN_DETERMINANT {
            return Err(GeometryError::Singular(det));
        }
        Ok(CameraMotion { kind: MotionKind::Homography, m })
    }

    /// Builds a motion of the same kind from a full 3x3 matrix.
    pub fn from_matrix(kind: MotionKind, m: &Matrix3<f64>) -> Result<Self, GeometryError> {
        match kind {
            MotionKind::Identity => Ok(CameraMotion::identity()),
            MotionKind::Affine => {
                let s = m[(2, 2)];
                if s.abs() < MIN_DETERMINANT {
                    return Err(GeometryError::Singular(s));
                }
                CameraMotion::affine([
                    m[(0, 0)] / s,
                    m[(0, 1)] / s,
                    m[(0, 2)] / s,
                    m[(1, 0)] / s,
                    m[(1, 1)] / s,
                    m[(1, 2)] / s,
                ])
            }
            MotionKind::Homography => {
                let mut h = [0.0; 9];
                for r in 0..3 {
                    for c in 0..3 {
                        h[3 * r + c] = m[(r, c)];
                    }
                }
                CameraMotion::homography(h)
            }
        }
    }

    pub fn kind(&self) -> MotionKind {
        self.kind
    }

    pub fn is_identity(&self) -> bool {
        self.kind == MotionKind::Identity
    }

    /// Row-major coefficients of the full 3x3 matrix.
    pub fn coefficients(&self) -> [f64; 9] {
        self.m
    }

    /// `[a11, a12, a13, a21, a22, a23]`; for a homography these are its top two rows.
    pub fn affine_coefficients(&self) -> [f64; 6] {
        [self.m[0], self.m[1], self.m[2], self.m[3], self.m[4], self.m[5]]
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_row_slice(&self.m)
    }

    pub fn apply(&self, p: Point2) -> Result<Point2, GeometryError> {
        let m = &self.m;
        match self.kind {
            MotionKind::Identity => Ok(p),
            MotionKind::Affine => Ok(Point2::new(
                m[0] * p.x + m[1] * p.y + m[2],
                m[3] * p.x + m[4] * p.y + m[5],
            )),
            MotionKind::Homography => {
                let den = m[6] * p.x + m[7] * p.y + m[8];
                if den.abs() < MIN_PROJECTIVE_DENOMINATOR {
                    return Err(GeometryError::DegenerateProjection(den));
                }
                Ok(Point2::new(
                    (m[0] * p.x + m[1] * p.y + m[2]) / den,
                    (m[3] * p.x + m[4] * p.y + m[5]) / den,
                ))
            }
        }
    }

    /// Jacobian of the point map evaluated at `p`.
    pub fn jacobian_at(&self, p: Point2) -> Result<Matrix2<f64>, GeometryError> {
        let m = &self.m;
        match self.kind {
            MotionKind::Identity => Ok(Matrix2::identity()),
            MotionKind::Affine => Ok(Matrix2::new(m[0], m[1], m[3], m[4])),
            MotionKind::Homography => {
                let den = m[6] * p.x + m[7] * p.y + m[8];
                if den.abs() < MIN_PROJECTIVE_DENOMINATOR {
                    return Err(GeometryError::DegenerateProjection(den));
                }
                let u = (m[0] * p.x + m[1] * p.y + m[2]) / den;
                let v = (m[3] * p.x + m[4] * p.y + m[5]) / den;
                Ok(Matrix2::new(
                    (m[0] - u * m[6]) / den,
                    (m[1] - u * m[7]) / den,
                    (m[3] - v * m[6]) / den,
                    (m[4] - v * m[7]) / den,
                ))
            }
        }
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        match self.kind {
            MotionKind::Identity => Ok(*self),
            kind => {
                let inv = self
                    .matrix()
                    .try_inverse()
                    .ok_or(GeometryError::Singular(self.matrix().determinant()))?;
                CameraMotion::from_matrix(kind, &inv)
            }
        }
    }

    /// The motion that applies `self` first and `next` second.
    pub fn then(&self, next: &CameraMotion) -> Result<Self, GeometryError> {
        let kind = match (self.kind, next.kind) {
            (MotionKind::Identity, _) => return Ok(*next),
            (_, MotionKind::Identity) => return Ok(*self),
            (MotionKind::Affine, MotionKind::Affine) => MotionKind::Affine,
            _ => MotionKind::Homography,
        };
        CameraMotion::from_matrix(kind, &(next.matrix() * self.matrix()))
    }

    /// Re-expresses a motion estimated on images scaled by `1 / factor` in full-resolution pixels.
    pub fn rescaled(&self, factor: f64) -> Result<Self, GeometryError> {
        if self.is_identity() || factor == 1.0 {
            return Ok(*self);
        }
        let s = Matrix3::from_diagonal(&Vector3::new(factor, factor, 1.0));
        let s_inv = Matrix3::from_diagonal(&Vector3::new(1.0 / factor, 1.0 / factor, 1.0));
        CameraMotion::from_matrix(self.kind, &(s * self.matrix() * s_inv))
    }
}

/// Maps a previous-frame point into the current frame.
pub fn apply_motion(m: &CameraMotion, p: Point2) -> Result<Point2, GeometryError> {
    m.apply(p)
}
