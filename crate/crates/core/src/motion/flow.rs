//! Pyramidal Lucas-Kanade sparse optical flow.
//!
//! Forward-additive formulation: the template patch and its gradients come from
//! the previous frame and are sampled once per level; each iteration resamples
//! the current frame at the displaced patch and solves the 2x2 normal equations.
//! Coarse levels sample with edge clamping; at full resolution a patch that
//! leaves either image loses the feature.

use crate::geometry::Point2;
use crate::imaging::{Plane, Pyramid};

use super::MotionError;

/// Features whose normalized structure tensor has a smaller eigenvalue than this are dropped.
pub const MIN_EIGEN_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    /// Patch half-size; the patch is `(2 * window + 1)^2` pixels.
    pub window: usize,
    pub max_iters: usize,
    /// Convergence threshold on the update step, in pixels of the current level.
    pub eps: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams { window: 10, max_iters: 30, eps: 0.01 }
    }
}

/// Correspondences between the previous and the current frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowMatches {
    pub prev: Vec<Point2>,
    pub curr: Vec<Point2>,
    pub status: Vec<bool>,
}

impl FlowMatches {
    pub fn len(&self) -> usize {
        self.prev.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prev.is_empty()
    }

    /// Builds an all-valid match set, e.g. from known correspondences.
    pub fn from_pairs(prev: Vec<Point2>, curr: Vec<Point2>) -> Self {
        assert_eq!(prev.len(), curr.len(), "correspondence lists differ in length");
        let status = vec![true; prev.len()];
        FlowMatches { prev, curr, status }
    }

    /// The successfully tracked pairs.
    pub fn tracked(&self) -> (Vec<Point2>, Vec<Point2>) {
        self.prev
            .iter()
            .zip(&self.curr)
            .zip(&self.status)
            .filter(|(_, &ok)| ok)
            .map(|((p, c), _)| (*p, *c))
            .unzip()
    }

    pub fn tracked_count(&self) -> usize {
        self.status.iter().filter(|&&s| s).count()
    }
}

/// Tracks `features` (previous-frame coordinates) into the current frame.
pub fn track_features(
    prev: &Pyramid,
    curr: &Pyramid,
    features: &[Point2],
    params: &FlowParams,
) -> Result<FlowMatches, MotionError> {
    if prev.len() != curr.len() {
        return Err(MotionError::Config(format!(
            "pyramid level counts differ: {} vs {}",
            prev.len(),
            curr.len()
        )));
    }
    for (a, b) in prev.levels().iter().zip(curr.levels()) {
        if (a.width(), a.height()) != (b.width(), b.height()) {
            return Err(MotionError::Config(format!(
                "pyramid level sizes differ: {}x{} vs {}x{}",
                a.width(),
                a.height(),
                b.width(),
                b.height()
            )));
        }
    }
    if params.window == 0 || params.max_iters == 0 || !(params.eps > 0.0) {
        return Err(MotionError::Config("flow window, iterations and eps must be positive".into()));
    }

    let mut tracker = PatchTracker::new(params);
    let mut out = FlowMatches::default();
    for &p in features {
        let (q, ok) = tracker.track(prev, curr, p);
        out.prev.push(p);
        out.curr.push(q);
        out.status.push(ok);
    }
    Ok(out)
}

struct PatchTracker {
    window: isize,
    max_iters: usize,
    eps: f64,
    template: Vec<f32>,
    grad_x: Vec<f32>,
    grad_y: Vec<f32>,
    scratch: Vec<f32>,
}

impl PatchTracker {
    fn new(params: &FlowParams) -> Self {
        let n = (2 * params.window + 1).pow(2);
        PatchTracker {
            window: params.window as isize,
            max_iters: params.max_iters,
            eps: params.eps,
            template: Vec::with_capacity(n),
            grad_x: Vec::with_capacity(n),
            grad_y: Vec::with_capacity(n),
            scratch: Vec::with_capacity((2 * params.window + 3).pow(2)),
        }
    }

    fn patch_inside(&self, img: &Plane, c: Point2, margin: f64) -> bool {
        let r = self.window as f64 + margin;
        img.contains(c.x - r, c.y - r) && img.contains(c.x + r, c.y + r)
    }

    fn track(&mut self, prev: &Pyramid, curr: &Pyramid, p: Point2) -> (Point2, bool) {
        let levels = prev.len();
        let mut guess = (0.0f64, 0.0f64);
        for level in (0..levels).rev() {
            let finest = level == 0;
            let scale = (1u32 << level) as f64;
            let u = Point2::new(p.x / scale, p.y / scale);
            let prev_img = prev.level(level);
            let curr_img = curr.level(level);

            if finest && !self.patch_inside(prev_img, u, 1.0) {
                return (p, false);
            }
            let Some(g) = self.load_template(prev_img, u) else {
                if finest {
                    return (p, false);
                }
                guess = (guess.0 * 2.0, guess.1 * 2.0);
                continue;
            };

            let mut d = (0.0f64, 0.0f64);
            for _ in 0..self.max_iters {
                let v = Point2::new(u.x + guess.0 + d.0, u.y + guess.1 + d.1);
                if finest && !self.patch_inside(curr_img, v, 0.0) {
                    return (v, false);
                }
                let (bx, by) = self.mismatch(curr_img, v);
                let step = (g.inv[0] * bx + g.inv[1] * by, g.inv[2] * bx + g.inv[3] * by);
                d.0 += step.0;
                d.1 += step.1;
                if d.0.hypot(d.1) > self.window as f64 {
                    let lost = Point2::new((u.x + guess.0 + d.0) * scale, (u.y + guess.1 + d.1) * scale);
                    return (lost, false);
                }
                if step.0.hypot(step.1) < self.eps {
                    break;
                }
            }
            if finest {
                let q = Point2::new(u.x + guess.0 + d.0, u.y + guess.1 + d.1);
                let ok = self.patch_inside(curr_img, q, 0.0);
                return (q, ok);
            }
            guess = (2.0 * (guess.0 + d.0), 2.0 * (guess.1 + d.1));
        }
        unreachable!("pyramid has at least one level")
    }

    /// Samples the template and its gradients around `u`; `None` when the
    /// structure tensor is too close to singular.
    fn load_template(&mut self, img: &Plane, u: Point2) -> Option<Gram> {
        let w = self.window as usize;
        let side = 2 * w + 1;
        // one extra ring for the central differences
        let r = self.window as f64 + 1.0;
        img.sample_grid(u.x - r, u.y - r, side + 2, &mut self.scratch);
        self.template.clear();
        self.grad_x.clear();
        self.grad_y.clear();
        let stride = side + 2;
        let (mut a, mut b, mut c) = (0.0f64, 0.0f64, 0.0f64);
        for j in 1..=side {
            let row = &self.scratch[j * stride..(j + 1) * stride];
            let up = &self.scratch[(j - 1) * stride..j * stride];
            let down = &self.scratch[(j + 1) * stride..(j + 2) * stride];
            for i in 1..=side {
                let ix = 0.5 * (row[i + 1] - row[i - 1]);
                let iy = 0.5 * (down[i] - up[i]);
                self.template.push(row[i]);
                self.grad_x.push(ix);
                self.grad_y.push(iy);
                a += (ix * ix) as f64;
                b += (ix * iy) as f64;
                c += (iy * iy) as f64;
            }
        }
        let norm = self.template.len() as f64 * 255.0 * 255.0;
        let half_trace = 0.5 * (a + c);
        let min_eig = half_trace - (0.25 * (a - c) * (a - c) + b * b).sqrt();
        if min_eig / norm < MIN_EIGEN_THRESHOLD {
            return None;
        }
        let det = a * c - b * b;
        Some(Gram { inv: [c / det, -b / det, -b / det, a / det] })
    }

    fn mismatch(&mut self, img: &Plane, v: Point2) -> (f64, f64) {
        let r = self.window as f64;
        let side = 2 * self.window as usize + 1;
        img.sample_grid(v.x - r, v.y - r, side, &mut self.scratch);
        let (mut bx, mut by) = (0.0f64, 0.0f64);
        for ((&t, &j), (&gx, &gy)) in self.template.iter().zip(&self.scratch).zip(self.grad_x.iter().zip(&self.grad_y)) {
            let diff = (t - j) as f64;
            bx += diff * gx as f64;
            by += diff * gy as f64;
        }
        (bx, by)
    }
}

/// Inverse of the 2x2 gradient normal matrix, row-major.
struct Gram {
    inv: [f64; 4],
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{build_pyramid, GrayFrame};

    fn texture(x: f64, y: f64) -> f64 {
        128.0 + 50.0 * (x * 0.21).sin() * (y * 0.17).cos() + 40.0 * (x * 0.05 + y * 0.09).sin()
    }

    fn render(w: usize, h: usize, dx: f64, dy: f64) -> GrayFrame {
        GrayFrame::from_fn(w, h, |x, y| texture(x as f64 - dx, y as f64 - dy).round() as u8).unwrap()
    }

    fn grid_points(w: usize, h: usize, margin: usize, step: usize) -> Vec<Point2> {
        let mut pts = Vec::new();
        for y in (margin..h - margin).step_by(step) {
            for x in (margin..w - margin).step_by(step) {
                pts.push(Point2::new(x as f64, y as f64));
            }
        }
        pts
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let f = render(160, 120, 0.0, 0.0);
        let p = build_pyramid(&f, 3).unwrap();
        let pts = grid_points(160, 120, 20, 15);
        let m = track_features(&p, &p, &pts, &FlowParams::default()).unwrap();
        assert!(m.status.iter().all(|&s| s));
        for (a, b) in m.prev.iter().zip(&m.curr) {
            assert!(a.distance(b) < 0.01);
        }
    }

    #[test]
    fn recovers_three_pixel_shift() {
        let a = build_pyramid(&render(200, 160, 0.0, 0.0), 3).unwrap();
        let b = build_pyramid(&render(200, 160, 3.0, 0.0), 3).unwrap();
        let pts = grid_points(200, 160, 24, 12);
        let m = track_features(&a, &b, &pts, &FlowParams::default()).unwrap();
        let good = m
            .prev
            .iter()
            .zip(&m.curr)
            .zip(&m.status)
            .filter(|((p, c), &ok)| ok && ((c.x - p.x) - 3.0).abs() < 0.25 && (c.y - p.y).abs() < 0.25)
            .count();
        assert!(good as f64 >= 0.9 * pts.len() as f64, "{good}/{}", pts.len());
    }

    #[test]
    fn feature_leaving_the_frame_is_lost() {
        let a = build_pyramid(&render(160, 120, 0.0, 0.0), 3).unwrap();
        let b = build_pyramid(&render(160, 120, 8.0, 0.0), 3).unwrap();
        // 8 px right shift pushes a patch centred 4 px from the right edge... off the image
        let m = track_features(&a, &b, &[Point2::new(145.0, 60.0)], &FlowParams::default()).unwrap();
        assert!(!m.status[0]);
    }

    #[test]
    fn flat_patch_is_lost() {
        let f = GrayFrame::filled(80, 80, 100).unwrap();
        let p = build_pyramid(&f, 2).unwrap();
        let m = track_features(&p, &p, &[Point2::new(40.0, 40.0)], &FlowParams::default()).unwrap();
        assert!(!m.status[0]);
    }

    #[test]
    fn mismatched_pyramids_are_rejected() {
        let f = render(64, 64, 0.0, 0.0);
        let a = build_pyramid(&f, 3).unwrap();
        let b = build_pyramid(&f, 2).unwrap();
        assert!(matches!(track_features(&a, &b, &[], &FlowParams::default()), Err(MotionError::Config(_))));
        let c = build_pyramid(&render(64, 48, 0.0, 0.0), 3).unwrap();
        assert!(track_features(&a, &c, &[], &FlowParams::default()).is_err());
    }
}
