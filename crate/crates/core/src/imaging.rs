//! Grayscale frames, Netpbm I/O and Gaussian pyramids.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geometry::Point2;

/// Smallest side length allowed for the coarsest pyramid level.
pub const MIN_LEVEL_SIZE: usize = 8;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported image format: {0}")]
    Unsupported(String),
    #[error("truncated image: {0}")]
    Truncated(String),
    #[error("dimension mismatch: header says {expected} bytes of pixel data, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("cannot build {levels} pyramid levels from a {width}x{height} image")]
    TooManyLevels { levels: usize, width: usize, height: usize },
    #[error("sample at ({x}, {y}) outside a {width}x{height} image")]
    OutOfBounds { x: f64, y: f64, width: usize, height: usize },
}

/// Single-channel 8-bit image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidFrame(format!("empty frame {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(ImageError::DimensionMismatch { expected: width * height, found: data.len() });
        }
        Ok(GrayFrame { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, ImageError> {
        GrayFrame::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayFrame::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Box-filter downscale by an integer factor (dimensions are floored).
    pub fn downscale(&self, factor: usize) -> Result<GrayFrame, ImageError> {
        if factor <= 1 {
            return Ok(self.clone());
        }
        let (w, h) = (self.width / factor, self.height / factor);
        let n = (factor * factor) as u32;
        GrayFrame::from_fn(w, h, |x, y| {
            let mut acc = 0u32;
            for dy in 0..factor {
                let row = (y * factor + dy) * self.width + x * factor;
                acc += self.data[row..row + factor].iter().map(|&v| v as u32).sum::<u32>();
            }
            ((acc + n / 2) / n) as u8
        })
    }
}

/// Reads a binary PGM (P5) or PPM (P6) file. Color is reduced to luminance.
pub fn load_frame(path: impl AsRef<Path>) -> Result<GrayFrame, ImageError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| ImageError::Io { path: path.to_owned(), source })?;
    decode_pnm(&bytes)
}

pub fn decode_pnm(bytes: &[u8]) -> Result<GrayFrame, ImageError> {
    if bytes.len() < 2 {
        return Err(ImageError::Truncated("missing magic number".into()));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(ImageError::Unsupported(format!(
                "magic {:?}; only binary P5/P6 are supported",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        *field = header_number(bytes, &mut pos)
            .ok_or_else(|| ImageError::Truncated(format!("header field {} missing", i + 1)))??;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(ImageError::Unsupported(format!("maxval {maxval}; only 255 is supported")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        Some(_) => return Err(ImageError::Unsupported("malformed header terminator".into())),
        None => return Err(ImageError::Truncated("no pixel data".into())),
    }
    let expected = width * height * channels;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(ImageError::Truncated(format!("expected {expected} bytes of pixel data, found {}", raster.len())));
    }
    if raster.len() > expected {
        return Err(ImageError::DimensionMismatch { expected, found: raster.len() });
    }
    let data = if channels == 1 {
        raster.to_vec()
    } else {
        raster.chunks_exact(3).map(|px| luminance(px[0], px[1], px[2])).collect()
    };
    GrayFrame::new(width, height, data)
}

/// ITU-R BT.601 luma, rounded to nearest.
pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round().clamp(0.0, 255.0) as u8
}

fn header_number(bytes: &[u8], pos: &mut usize) -> Option<Result<usize, ImageError>> {
    loop {
        match bytes.get(*pos)? {
            b'#' => {
                while *bytes.get(*pos)? != b'\n' {
                    *pos += 1;
                }
            }
            b if b.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| b.is_ascii_digit()) {
        *pos += 1;
    }
    if start == *pos {
        return Some(Err(ImageError::Unsupported(format!("unexpected byte {:#04x} in header", bytes[start]))));
    }
    let text = std::str::from_utf8(&bytes[start..*pos]).expect("ascii digits");
    Some(text.parse().map_err(|_| ImageError::Unsupported(format!("header value {text} out of range"))))
}

pub fn encode_pgm(frame: &GrayFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.data);
    out
}

pub fn save_pgm(frame: &GrayFrame, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(frame)).map_err(|source| ImageError::Io { path: path.to_owned(), source })
}

/// Image files in `dir`, ordered by the numeric value of their file stem.
///
/// Files whose stem is not a number, or whose extension is not `pgm`/`ppm`, are skipped.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<(u64, PathBuf)>, ImageError> {
    let dir = dir.as_ref();
    let io_err = |source| ImageError::Io { path: dir.to_owned(), source };
    let mut frames = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !matches!(ext.as_deref(), Some("pgm" | "ppm")) {
            continue;
        }
        if let Some(n) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<u64>().ok()) {
            frames.push((n, path));
        }
    }
    frames.sort();
    Ok(frames)
}

/// Real-valued single-channel image, one pyramid level.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height, "plane data length");
        Plane { width, height, data }
    }

    pub fn from_frame(f: &GrayFrame) -> Self {
        Plane::new(f.width, f.height, f.data.iter().map(|&v| v as f32).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Whether a bilinear sample at `(x, y)` stays inside the image.
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64
    }

    /// Bilinear sample; the caller guarantees `contains(x, y)`.
    #[inline]
    pub(crate) fn sample_inside(&self, x: f64, y: f64) -> f32 {
        let x0 = (x.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (y.floor() as usize).min(self.height.saturating_sub(2));
        let fx = (x - x0 as f64) as f32;
        let fy = (y - y0 as f64) as f32;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let r0 = y0 * self.width;
        let r1 = y1 * self.width;
        let top = self.data[r0 + x0] + fx * (self.data[r0 + x1] - self.data[r0 + x0]);
        let bottom = self.data[r1 + x0] + fx * (self.data[r1 + x1] - self.data[r1 + x0]);
        top + fy * (bottom - top)
    }

    /// Bilinear sample with coordinates clamped to the image (edge replication).
    #[inline]
    pub fn sample_clamped(&self, x: f64, y: f64) -> f32 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        self.sample_inside(x, y)
    }

    /// Samples the `n`x`n` unit-spaced grid whose top-left point is `(x, y)`,
    /// row by row, into `out`. Points outside the image are edge-clamped.
    pub(crate) fn sample_grid(&self, x: f64, y: f64, n: usize, out: &mut Vec<f32>) {
        out.clear();
        let (fx0, fy0) = (x.floor(), y.floor());
        let interior = fx0 >= 0.0
            && fy0 >= 0.0
            && fx0 as usize + n < self.width
            && fy0 as usize + n < self.height;
        if !interior {
            for j in 0..n {
                for i in 0..n {
                    out.push(self.sample_clamped(x + i as f64, y + j as f64));
                }
            }
            return;
        }
        let (x0, y0) = (fx0 as usize, fy0 as usize);
        let fx = (x - fx0) as f32;
        let fy = (y - fy0) as f32;
        for j in 0..n {
            let r0 = &self.data[(y0 + j) * self.width + x0..][..n + 1];
            let r1 = &self.data[(y0 + j + 1) * self.width + x0..][..n + 1];
            for i in 0..n {
                let top = r0[i] + fx * (r0[i + 1] - r0[i]);
                let bottom = r1[i] + fx * (r1[i + 1] - r1[i]);
                out.push(top + fy * (bottom - top));
            }
        }
    }

    pub fn sample(&self, p: Point2) -> Result<f32, ImageError> {
        sample_bilinear(self, p)
    }

    fn smooth_and_decimate(&self) -> Plane {
        const TAPS: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
        let (w, h) = (self.width, self.height);
        let (nw, nh) = (w / 2, h / 2);
        let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

        // vertical pass only on the rows that survive decimation
        let mut rows = vec![0.0f32; nh * w];
        for ny in 0..nh {
            let y = (2 * ny) as isize;
            let out = &mut rows[ny * w..(ny + 1) * w];
            for (k, tap) in TAPS.iter().enumerate() {
                let src = clamp(y + k as isize - 2, h) * w;
                for (o, s) in out.iter_mut().zip(&self.data[src..src + w]) {
                    *o += tap * s;
                }
            }
        }
        let mut data = Vec::with_capacity(nw * nh);
        for ny in 0..nh {
            let row = &rows[ny * w..(ny + 1) * w];
            for nx in 0..nw {
                let x = (2 * nx) as isize;
                let v: f32 = TAPS
                    .iter()
                    .enumerate()
                    .map(|(k, tap)| tap * row[clamp(x + k as isize - 2, w)])
                    .sum();
                data.push(v);
            }
        }
        Plane::new(nw, nh, data)
    }
}

/// Bilinear interpolation of the four pixels around `p`.
pub fn sample_bilinear(img: &Plane, p: Point2) -> Result<f32, ImageError> {
    if !img.contains(p.x, p.y) {
        return Err(ImageError::OutOfBounds { x: p.x, y: p.y, width: img.width, height: img.height });
    }
    Ok(img.sample_inside(p.x, p.y))
}

/// Coarse-to-fine image stack; level 0 is full resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    levels: Vec<Plane>,
}

impl Pyramid {
    pub fn levels(&self) -> &[Plane] {
        &self.levels
    }

    pub fn level(&self, i: usize) -> &Plane {
        &self.levels[i]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Largest level count a `width`x`height` image supports.
    pub fn max_levels(width: usize, height: usize) -> usize {
        let mut n = 0;
        let (mut w, mut h) = (width, height);
        while w >= MIN_LEVEL_SIZE && h >= MIN_LEVEL_SIZE {
            n += 1;
            w /= 2;
            h /= 2;
        }
        n
    }
}

/// Builds a pyramid with 5-tap binomial smoothing (clamp-to-edge) and 2x decimation.
pub fn build_pyramid(f: &GrayFrame, levels: usize) -> Result<Pyramid, ImageError> {
    if levels == 0 || levels > Pyramid::max_levels(f.width, f.height) {
        return Err(ImageError::TooManyLevels { levels, width: f.width, height: f.height });
    }
    let mut out = Vec::with_capacity(levels);
    out.push(Plane::from_frame(f));
    for _ in 1..levels {
        let next = out.last().expect("non-empty").smooth_and_decimate();
        out.push(next);
    }
    Ok(Pyramid { levels: out })
}
