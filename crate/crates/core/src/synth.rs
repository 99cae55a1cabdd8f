//! Deterministic synthetic sequences with exact ground truth.
//!
//! A static world (value-noise background plus blocky random-textured boxes) is
//! filmed by a moving camera. Frame `k` is described by the world-to-viewport
//! map `V_k`: a viewport pixel `q` shows the world point `V_k^-1(q)`. Points
//! are `(x, y)` with y pointing down. Panning the camera right by `t` pixels
//! per frame therefore moves scene content left by `t` pixels per frame.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, CameraMotion, GeometryError, Point2};
use crate::imaging::{GrayFrame, Plane};
use crate::metrics::MotSequence;
use crate::tracker::Detection;

/// Share of a box that must remain inside the viewport for it to be annotated.
pub const MIN_VISIBLE_FRACTION: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic script: {0}")]
    Invalid(String),
    #[error("degenerate camera transform at frame {frame}: {source}")]
    DegenerateTransform { frame: usize, source: GeometryError },
    #[error("frame index {0} out of range")]
    FrameOutOfRange(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corruption {
    /// Standard deviation of the Gaussian noise on center and size, in pixels.
    pub jitter: f64,
    /// Probability that a visible box gets no detection.
    pub drop: f64,
    /// Expected number of false-positive detections per frame.
    pub fp_rate: f64,
}

impl Corruption {
    pub const NONE: Corruption = Corruption { jitter: 0.0, drop: 0.0, fp_rate: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldBox {
    pub bbox: BBox,
    pub texture_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthScript {
    pub world_width: usize,
    pub world_height: usize,
    pub width: usize,
    pub height: usize,
    pub boxes: Vec<WorldBox>,
    /// World-to-viewport map for each frame.
    pub camera: Vec<CameraMotion>,
    pub corruption: Corruption,
    /// Drives detection corruption.
    pub seed: u64,
    /// Drives the world texture.
    pub layout_seed: u64,
    pub frame_rate: f64,
}

/// Parameters for a generated camera path and box layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub num_boxes: usize,
    pub box_min: f64,
    pub box_max: f64,
    /// Camera translation per frame, world pixels.
    pub pan_x: f64,
    pub pan_y: f64,
    /// Multiplicative zoom per frame.
    pub zoom: f64,
    /// Rotation per frame, radians.
    pub rotation: f64,
    /// Amplitude (pixels) and period (frames) of a vertical sinusoidal sway.
    pub sway: f64,
    pub sway_period: f64,
    pub corruption: Corruption,
    /// Drives detection corruption only.
    pub seed: u64,
    /// Drives box placement and textures.
    pub layout_seed: u64,
    pub frame_rate: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            frames: 100,
            width: 1280,
            height: 720,
            num_boxes: 8,
            box_min: 50.0,
            box_max: 110.0,
            pan_x: 3.0,
            pan_y: 0.0,
            zoom: 1.0015,
            rotation: 0.0,
            sway: 6.0,
            sway_period: 40.0,
            corruption: Corruption { jitter: 2.0, drop: 0.05, fp_rate: 0.0 },
            seed: 0,
            layout_seed: 0,
            frame_rate: 30.0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.frames == 0 {
            return bad("frames must be at least 1".into());
        }
        if self.width < 16 || self.height < 16 {
            return bad(format!("viewport {}x{} smaller than 16x16", self.width, self.height));
        }
        if !(self.box_min > 0.0 && self.box_max >= self.box_min) {
            return bad("need 0 < box_min <= box_max".into());
        }
        if !(self.zoom > 0.0) || !self.zoom.is_finite() {
            return bad("zoom must be positive".into());
        }
        if !(self.frame_rate > 0.0) {
            return bad("frame_rate must be positive".into());
        }
        if self.sway != 0.0 && !(self.sway_period > 0.0) {
            return bad("sway_period must be positive".into());
        }
        validate_corruption(&self.corruption)
    }
}

fn validate_corruption(c: &Corruption) -> Result<(), SynthError> {
    if !(c.jitter >= 0.0) || !(0.0..=1.0).contains(&c.drop) || !(c.fp_rate >= 0.0) {
        return Err(SynthError::Invalid("jitter and fp_rate must be >= 0, drop in [0, 1]".into()));
    }
    Ok(())
}

fn invert(m: &CameraMotion, frame: usize) -> Result<CameraMotion, SynthError> {
    m.inverse().map_err(|source| SynthError::DegenerateTransform { frame, source })
}

fn footprint(v: &CameraMotion, width: usize, height: usize, frame: usize) -> Result<[Point2; 4], SynthError> {
    let inv = invert(v, frame)?;
    let (w, h) = (width as f64, height as f64);
    let mut out = [Point2::new(0.0, 0.0); 4];
    for (o, c) in out.iter_mut().zip([(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)]) {
        *o = inv.apply(Point2::new(c.0, c.1)).map_err(|source| SynthError::DegenerateTransform { frame, source })?;
    }
    Ok(out)
}

impl SynthScript {
    /// Builds a script from path parameters; box placement is drawn from `layout_seed`.
    pub fn generate(p: &SynthParams) -> Result<Self, SynthError> {
        p.validate()?;
        let (w, h) = (p.width as f64, p.height as f64);
        let half = Point2::new(w / 2.0, h / 2.0);
        let mut path = Vec::with_capacity(p.frames);
        let mut centers = Vec::with_capacity(p.frames);
        for k in 0..p.frames {
            let t = k as f64;
            let sway = if p.sway != 0.0 { p.sway * (2.0 * std::f64::consts::PI * t / p.sway_period).sin() } else { 0.0 };
            let c = Point2::new(p.pan_x * t, p.pan_y * t + sway);
            let s = p.zoom.powf(t);
            let (cos, sin) = ((p.rotation * t).cos(), (p.rotation * t).sin());
            // q = s R (x - c) + half
            let a = [
                s * cos,
                -s * sin,
                half.x - s * (cos * c.x - sin * c.y),
                s * sin,
                s * cos,
                half.y - s * (sin * c.x + cos * c.y),
            ];
            path.push(CameraMotion::affine(a).map_err(|source| SynthError::DegenerateTransform { frame: k, source })?);
            centers.push(c);
        }

        // world extent: union of all footprints plus a margin, shifted to start at 0
        let margin = 16.0;
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        // region visible in every frame, used for box placement
        let (mut ix0, mut iy0, mut ix1, mut iy1) = (f64::MIN, f64::MIN, f64::MAX, f64::MAX);
        for (k, v) in path.iter().enumerate() {
            let fp = footprint(v, p.width, p.height, k)?;
            let (fx0, fx1) = fp.iter().fold((f64::MAX, f64::MIN), |a, q| (a.0.min(q.x), a.1.max(q.x)));
            let (fy0, fy1) = fp.iter().fold((f64::MAX, f64::MIN), |a, q| (a.0.min(q.y), a.1.max(q.y)));
            x0 = x0.min(fx0);
            y0 = y0.min(fy0);
            x1 = x1.max(fx1);
            y1 = y1.max(fy1);
            // inner axis-aligned rectangle: second-smallest / second-largest corner coordinates
            let mut xs: Vec<f64> = fp.iter().map(|q| q.x).collect();
            let mut ys: Vec<f64> = fp.iter().map(|q| q.y).collect();
            xs.sort_by(f64::total_cmp);
            ys.sort_by(f64::total_cmp);
            ix0 = ix0.max(xs[1]);
            ix1 = ix1.min(xs[2]);
            iy0 = iy0.max(ys[1]);
            iy1 = iy1.min(ys[2]);
        }
        let shift = Point2::new(margin - x0, margin - y0);
        let world_width = (x1 - x0 + 2.0 * margin).ceil() as usize;
        let world_height = (y1 - y0 + 2.0 * margin).ceil() as usize;
        let to_world = CameraMotion::translation(-shift.x, -shift.y);
        let camera = path
            .iter()
            .enumerate()
            .map(|(k, v)| to_world.then(v).map_err(|source| SynthError::DegenerateTransform { frame: k, source }))
            .collect::<Result<Vec<_>, _>>()?;

        let mut rng = ChaCha8Rng::seed_from_u64(p.layout_seed ^ 0x5eed_b0c5);
        let region = if ix1 - ix0 > p.box_max * 1.5 && iy1 - iy0 > p.box_max * 1.5 {
            (ix0 + 10.0, iy0 + 10.0, ix1 - 10.0, iy1 - 10.0)
        } else {
            (x0 + margin, y0 + margin, x1 - margin, y1 - margin)
        };
        let boxes = place_boxes(&mut rng, p, region)?
            .into_iter()
            .map(|b| WorldBox {
                bbox: BBox::new(b.x_c() + shift.x, b.y_c() + shift.y, b.w(), b.h()).expect("shifted box stays valid"),
                texture_seed: rng.random(),
            })
            .collect();

        let script = SynthScript {
            world_width,
            world_height,
            width: p.width,
            height: p.height,
            boxes,
            camera,
            corruption: p.corruption,
            seed: p.seed,
            layout_seed: p.layout_seed,
            frame_rate: p.frame_rate,
        };
        script.validate()?;
        Ok(script)
    }

    pub fn num_frames(&self) -> usize {
        self.camera.len()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.width < 16 || self.height < 16 || self.world_width < 2 || self.world_height < 2 {
            return Err(SynthError::Invalid("world and viewport must be non-trivial".into()));
        }
        validate_corruption(&self.corruption)?;
        for (k, v) in self.camera.iter().enumerate() {
            invert(v, k)?;
        }
        for (i, b) in self.boxes.iter().enumerate() {
            let visible = (0..self.num_frames()).any(|k| self.project(&b.bbox, k).ok().flatten().is_some());
            if !visible {
                return Err(SynthError::Invalid(format!("box {} is never visible", i + 1)));
            }
        }
        Ok(())
    }

    /// Exact camera motion from frame `k - 1` to frame `k`: `V_k ∘ V_{k-1}^-1`.
    pub fn true_motion(&self, k: usize) -> Result<CameraMotion, SynthError> {
        if k == 0 || k >= self.num_frames() {
            return Err(SynthError::FrameOutOfRange(k));
        }
        let prev_inv = invert(&self.camera[k - 1], k - 1)?;
        prev_inv.then(&self.camera[k]).map_err(|source| SynthError::DegenerateTransform { frame: k, source })
    }

    /// Viewport box of a world box at frame `k`: the bounding box of its mapped
    /// corners, clipped to the viewport; `None` when less than a quarter shows.
    pub fn project(&self, world: &BBox, k: usize) -> Result<Option<BBox>, SynthError> {
        let v = self.camera.get(k).ok_or(SynthError::FrameOutOfRange(k))?;
        let corners = [
            (world.left(), world.top()),
            (world.right(), world.top()),
            (world.left(), world.bottom()),
            (world.right(), world.bottom()),
        ];
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for (x, y) in corners {
            let q = v.apply(Point2::new(x, y)).map_err(|source| SynthError::DegenerateTransform { frame: k, source })?;
            x0 = x0.min(q.x);
            y0 = y0.min(q.y);
            x1 = x1.max(q.x);
            y1 = y1.max(q.y);
        }
        let full = (x1 - x0) * (y1 - y0);
        let (cx0, cy0) = (x0.max(0.0), y0.max(0.0));
        let (cx1, cy1) = (x1.min(self.width as f64), y1.min(self.height as f64));
        if cx1 <= cx0 || cy1 <= cy0 || full <= 0.0 {
            return Ok(None);
        }
        if (cx1 - cx0) * (cy1 - cy0) < MIN_VISIBLE_FRACTION * full {
            return Ok(None);
        }
        Ok(BBox::from_corners(cx0, cy0, cx1, cy1).ok())
    }

    /// Ground-truth boxes of frame `k`, ids starting at 1 in script order.
    pub fn ground_truth_frame(&self, k: usize) -> Result<Vec<(u64, BBox)>, SynthError> {
        let mut out = Vec::new();
        for (i, b) in self.boxes.iter().enumerate() {
            if let Some(vb) = self.project(&b.bbox, k)? {
                out.push((i as u64 + 1, vb));
            }
        }
        Ok(out)
    }

    pub fn ground_truth(&self) -> Result<MotSequence, SynthError> {
        let frames = (0..self.num_frames()).map(|k| self.ground_truth_frame(k)).collect::<Result<Vec<_>, _>>()?;
        Ok(MotSequence::new(frames).expect("script ids are unique"))
    }

    /// Detections derived from the ground truth with the script's corruption.
    pub fn detections(&self, gt: &MotSequence) -> Vec<Vec<Detection>> {
        let c = self.corruption;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, c.jitter.max(0.0)).expect("finite jitter");
        let (w, h) = (self.width as f64, self.height as f64);
        let mut out = Vec::with_capacity(gt.len());
        for frame in gt.frames() {
            let mut dets = Vec::with_capacity(frame.len());
            for (_, b) in frame {
                let dropped = rng.random::<f64>() < c.drop;
                let offsets: [f64; 4] = std::array::from_fn(|_| if c.jitter > 0.0 { noise.sample(&mut rng) } else { 0.0 });
                let confidence = rng.random_range(0.5..=1.0);
                if dropped {
                    continue;
                }
                let bbox = if c.jitter > 0.0 {
                    BBox::new(b.x_c() + offsets[0], b.y_c() + offsets[1], (b.w() + offsets[2]).max(2.0), (b.h() + offsets[3]).max(2.0))
                        .unwrap_or(*b)
                } else {
                    *b
                };
                dets.push(Detection::new(bbox, confidence));
            }
            let whole = c.fp_rate.floor() as usize;
            let extra = usize::from(rng.random::<f64>() < c.fp_rate.fract());
            for _ in 0..whole + extra {
                let bw = rng.random_range(20.0..100.0f64).min(w - 1.0);
                let bh = rng.random_range(20.0..100.0f64).min(h - 1.0);
                let x = rng.random_range(bw / 2.0..=w - bw / 2.0);
                let y = rng.random_range(bh / 2.0..=h - bh / 2.0);
                let confidence = rng.random_range(0.3..=0.7);
                dets.push(Detection::new(BBox::new(x, y, bw, bh).expect("positive size"), confidence));
            }
            out.push(dets);
        }
        out
    }

    /// The static world as seen from nowhere in particular: background plus boxes.
    pub fn world(&self) -> World {
        World::new(self)
    }

    pub fn render_sequence(&self) -> Result<SynthSequence, SynthError> {
        let world = self.world();
        let frames = (0..self.num_frames()).map(|k| world.render(self, k)).collect::<Result<Vec<_>, _>>()?;
        let gt = self.ground_truth()?;
        let detections = self.detections(&gt);
        Ok(SynthSequence { frames, gt, detections })
    }
}

fn place_boxes(rng: &mut ChaCha8Rng, p: &SynthParams, region: (f64, f64, f64, f64)) -> Result<Vec<BBox>, SynthError> {
    let (rx0, ry0, rx1, ry1) = region;
    let mut boxes: Vec<BBox> = Vec::with_capacity(p.num_boxes);
    let gap = 12.0;
    for _ in 0..p.num_boxes {
        let mut placed = false;
        for _ in 0..10_000 {
            let bw = rng.random_range(p.box_min..=p.box_max);
            let bh = rng.random_range(p.box_min..=p.box_max);
            if rx1 - rx0 <= bw || ry1 - ry0 <= bh {
                break;
            }
            let x = rng.random_range(rx0 + bw / 2.0..rx1 - bw / 2.0);
            let y = rng.random_range(ry0 + bh / 2.0..ry1 - bh / 2.0);
            let candidate = BBox::new(x, y, bw, bh).expect("positive size");
            let clear = boxes.iter().all(|b| {
                (b.x_c() - x).abs() > (b.w() + bw) / 2.0 + gap || (b.y_c() - y).abs() > (b.h() + bh) / 2.0 + gap
            });
            if clear {
                boxes.push(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SynthError::Invalid(format!("could not place {} non-overlapping boxes", p.num_boxes)));
        }
    }
    Ok(boxes)
}

/// Rendered frames with their annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSequence {
    pub frames: Vec<GrayFrame>,
    pub gt: MotSequence,
    pub detections: Vec<Vec<Detection>>,
}

/// Rasterised world intensities.
#[derive(Debug, Clone)]
pub struct World {
    plane: Plane,
}

fn hash64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn lattice(seed: u64, octave: u64, i: i64, j: i64) -> f64 {
    let h = hash64(seed ^ hash64(octave ^ hash64((i as u64) ^ hash64(j as u64 ^ 0xabcdef))));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Smooth value noise in [0, 1) summed over three octaves.
fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let octaves = [(24.0, 0.45), (10.0, 0.35), (4.0, 0.2)];
    let mut v = 0.0;
    for (o, &(cell, amp)) in octaves.iter().enumerate() {
        let (fx, fy) = (x / cell, y / cell);
        let (i, j) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - i, fy - j);
        let (sx, sy) = (tx * tx * (3.0 - 2.0 * tx), ty * ty * (3.0 - 2.0 * ty));
        let (i, j) = (i as i64, j as i64);
        let o = o as u64;
        let a = lattice(seed, o, i, j);
        let b = lattice(seed, o, i + 1, j);
        let c = lattice(seed, o, i, j + 1);
        let d = lattice(seed, o, i + 1, j + 1);
        v += amp * (a + (b - a) * sx + (c - a) * sy + (a - b - c + d) * sx * sy);
    }
    v
}

impl World {
    fn new(script: &SynthScript) -> Self {
        let (w, h) = (script.world_width, script.world_height);
        let mut data = vec![0.0f32; w * h];
        for y in 0..h {
            for x in 0..w {
                data[y * w + x] = (20.0 + 215.0 * value_noise(script.layout_seed ^ 0xbac6, x as f64, y as f64)) as f32;
            }
        }
        for b in &script.boxes {
            let s = hash64(b.texture_seed);
            let cell = 5.0 + (s % 4) as f64;
            let bb = &b.bbox;
            let (x0, y0) = (bb.left().max(0.0).floor() as usize, bb.top().max(0.0).floor() as usize);
            let (x1, y1) = ((bb.right().ceil() as usize).min(w), (bb.bottom().ceil() as usize).min(h));
            for y in y0..y1 {
                for x in x0..x1 {
                    let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                    if px < bb.left() || px >= bb.right() || py < bb.top() || py >= bb.bottom() {
                        continue;
                    }
                    let (u, v) = (((px - bb.left()) / cell) as i64, ((py - bb.top()) / cell) as i64);
                    let edge = px - bb.left() < 2.0 || bb.right() - px < 2.0 || py - bb.top() < 2.0 || bb.bottom() - py < 2.0;
                    data[y * w + x] = if edge {
                        0.0
                    } else {
                        (40.0 + (hash64(s ^ hash64((u as u64) << 32 | v as u64)) % 176) as f64) as f32
                    };
                }
            }
        }
        World { plane: Plane::new(w, h, data) }
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }

    /// Frame `k` of the script, bilinearly resampled from the world raster.
    pub fn render(&self, script: &SynthScript, k: usize) -> Result<GrayFrame, SynthError> {
        let v = script.camera.get(k).ok_or(SynthError::FrameOutOfRange(k))?;
        let inv = invert(v, k)?.affine_coefficients();
        GrayFrame::from_fn(script.width, script.height, |x, y| {
            let (qx, qy) = (x as f64, y as f64);
            let wx = inv[0] * qx + inv[1] * qy + inv[2];
            let wy = inv[3] * qx + inv[4] * qy + inv[5];
            self.plane.sample_clamped(wx, wy).round().clamp(0.0, 255.0) as u8
        })
        .map_err(|e| SynthError::Invalid(e.to_string()))
    }
}
