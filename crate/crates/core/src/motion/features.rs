//! Shi-Tomasi corner detection.

use crate::geometry::Point2;
use crate::imaging::GrayFrame;

/// Detected corners, strongest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureSet {
    points: Vec<Point2>,
    scores: Vec<f32>,
}

impl FeatureSet {
    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    /// Minimum structure-tensor eigenvalue at each point.
    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl From<Vec<Point2>> for FeatureSet {
    /// Wraps externally chosen points; scores are set to zero.
    fn from(points: Vec<Point2>) -> Self {
        let scores = vec![0.0; points.len()];
        FeatureSet { points, scores }
    }
}

/// Smaller eigenvalue of the 3x3-summed Sobel structure tensor at every pixel.
///
/// Pixels within two of the border, where the window would need gradients
/// that do not exist, are zero.
pub fn min_eigenvalue_map(f: &GrayFrame) -> Vec<f32> {
    let (w, h) = (f.width(), f.height());
    let mut out = vec![0.0f32; w * h];
    if w < 5 || h < 5 {
        return out;
    }
    let data = f.data();
    // gradient products for the three most recent rows, each with 3x1 horizontal sums
    let mut ring = vec![[0.0f32; 3]; 3 * w];
    let mut products = vec![[0.0f32; 3]; w];
    for y in 1..h - 1 {
        let up = &data[(y - 1) * w..y * w];
        let mid = &data[y * w..(y + 1) * w];
        let down = &data[(y + 1) * w..(y + 2) * w];
        for x in 1..w - 1 {
            let p = |r: &[u8], i: usize| r[i] as f32;
            let dx = (p(up, x + 1) + 2.0 * p(mid, x + 1) + p(down, x + 1) - p(up, x - 1) - 2.0 * p(mid, x - 1) - p(down, x - 1))
                / 8.0;
            let dy = (p(down, x - 1) + 2.0 * p(down, x) + p(down, x + 1) - p(up, x - 1) - 2.0 * p(up, x) - p(up, x + 1))
                / 8.0;
            products[x] = [dx * dx, dx * dy, dy * dy];
        }
        let slot = &mut ring[(y % 3) * w..(y % 3 + 1) * w];
        for x in 2..w - 2 {
            let (l, c, r) = (products[x - 1], products[x], products[x + 1]);
            slot[x] = [l[0] + c[0] + r[0], l[1] + c[1] + r[1], l[2] + c[2] + r[2]];
        }
        if y < 3 {
            continue;
        }
        // rows y-2..=y are complete: finish the window centred on y-1
        let cy = y - 1;
        if cy > h - 3 {
            continue;
        }
        let (r0, rest) = ring.split_at(w);
        let (r1, r2) = rest.split_at(w);
        let row = &mut out[cy * w..(cy + 1) * w];
        for x in 2..w - 2 {
            let (p0, p1, p2) = (r0[x], r1[x], r2[x]);
            let a = p0[0] + p1[0] + p2[0];
            let b = p0[1] + p1[1] + p2[1];
            let c = p0[2] + p1[2] + p2[2];
            let half_trace = 0.5 * (a + c);
            let diff = 0.5 * (a - c);
            row[x] = (half_trace - (diff * diff + b * b).sqrt()).max(0.0);
        }
    }
    out
}

/// Finds up to `max_corners` Shi-Tomasi corners, strongest first.
///
/// A pixel qualifies when its minimum eigenvalue is a 3x3 local maximum and is
/// at least `quality_level` times the strongest response in the frame. Greedy
/// suppression then drops any corner closer than `min_distance` to a stronger one.
pub fn detect_features(f: &GrayFrame, max_corners: usize, quality_level: f64, min_distance: f64) -> FeatureSet {
    let (w, h) = (f.width(), f.height());
    let eig = min_eigenvalue_map(f);
    let max_eig = eig.iter().copied().fold(0.0f32, f32::max);
    if max_corners == 0 || max_eig <= 1e-6 {
        return FeatureSet::default();
    }
    let threshold = (quality_level * max_eig as f64) as f32;

    let mut candidates = Vec::new();
    for y in 2..h.saturating_sub(2) {
        for x in 2..w.saturating_sub(2) {
            let v = eig[y * w + x];
            if v < threshold || v <= 0.0 {
                continue;
            }
            let (up, mid, down) = (&eig[(y - 1) * w + x - 1..][..3], &eig[y * w + x - 1..][..3], &eig[(y + 1) * w + x - 1..][..3]);
            let is_max = up.iter().chain(mid).chain(down).all(|&n| n <= v);
            if is_max {
                candidates.push((v, y * w + x));
            }
        }
    }
    // strongest first, then raster order
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut grid = SpacingGrid::new(w, h, min_distance);
    let mut out = FeatureSet::default();
    for (score, idx) in candidates {
        let p = Point2::new((idx % w) as f64, (idx / w) as f64);
        if grid.try_insert(p) {
            out.points.push(p);
            out.scores.push(score);
            if out.points.len() == max_corners {
                break;
            }
        }
    }
    out
}

/// Bucketed point set answering "is anything within `radius`?".
struct SpacingGrid {
    radius: f64,
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<Point2>>,
}

impl SpacingGrid {
    fn new(width: usize, height: usize, radius: f64) -> Self {
        let cell = radius.max(1.0);
        let cols = (width as f64 / cell).ceil() as usize + 1;
        let rows = (height as f64 / cell).ceil() as usize + 1;
        SpacingGrid { radius, cell, cols, rows, buckets: vec![Vec::new(); cols * rows] }
    }

    fn try_insert(&mut self, p: Point2) -> bool {
        let cx = (p.x / self.cell) as usize;
        let cy = (p.y / self.cell) as usize;
        if self.radius > 0.0 {
            let r2 = self.radius * self.radius;
            for gy in cy.saturating_sub(1)..=(cy + 1).min(self.rows - 1) {
                for gx in cx.saturating_sub(1)..=(cx + 1).min(self.cols - 1) {
                    let near = self.buckets[gy * self.cols + gx].iter().any(|q| {
                        let (dx, dy) = (q.x - p.x, q.y - p.y);
                        dx * dx + dy * dy < r2
                    });
                    if near {
                        return false;
                    }
                }
            }
        }
        self.buckets[cy * self.cols + cx].push(p);
        true
    }
}
