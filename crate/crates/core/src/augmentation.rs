//! Stochastic editing pipeline used to prepare training patches.
//!
//! The pipeline emulates common amateur edits: flips, 90 degree rotations,
//! histogram equalization, blur, colour jitter, a downscale-upscale cycle,
//! and finally JPEG compression. Each operation is gated independently
//! (probability 0.5 by default, 0.7 for JPEG) and every decision together
//! with its sampled parameters is written to an [`AugmentationLog`], which
//! can be replayed to reproduce the output bit-exactly.

use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::{ExtendedColorType, ImageFormat};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ImageBuffer;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AugmentError {
    #[error("invalid parameter for {op}: {reason}")]
    InvalidParameter { op: &'static str, reason: String },
    #[error("JPEG codec failure: {0}")]
    CodecFailure(String),
}

fn invalid(op: &'static str, reason: impl Into<String>) -> AugmentError {
    AugmentError::InvalidParameter {
        op,
        reason: reason.into(),
    }
}

/// Pipeline stages, in application order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Hflip,
    Vflip,
    Rot90,
    HistEq,
    Blur,
    Brightness,
    Contrast,
    Color,
    Saturation,
    DownUpScale,
    Jpeg,
}

impl OpKind {
    pub const PIPELINE: [OpKind; 11] = [
        OpKind::Hflip,
        OpKind::Vflip,
        OpKind::Rot90,
        OpKind::HistEq,
        OpKind::Blur,
        OpKind::Brightness,
        OpKind::Contrast,
        OpKind::Color,
        OpKind::Saturation,
        OpKind::DownUpScale,
        OpKind::Jpeg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Hflip => "hflip",
            OpKind::Vflip => "vflip",
            OpKind::Rot90 => "rot90",
            OpKind::HistEq => "hist_eq",
            OpKind::Blur => "blur",
            OpKind::Brightness => "brightness",
            OpKind::Contrast => "contrast",
            OpKind::Color => "color",
            OpKind::Saturation => "saturation",
            OpKind::DownUpScale => "down_up_scale",
            OpKind::Jpeg => "jpeg",
        }
    }
}

/// One concrete edit with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Augmentation {
    Hflip,
    Vflip,
    /// Counterclockwise rotation by `k` quarter turns.
    Rot90 { k: u8 },
    HistEq,
    Blur { radius: u32 },
    Brightness { delta: f64 },
    Contrast { delta: f64 },
    /// Hue rotation by `delta` turns.
    Color { delta: f64 },
    Saturation { delta: f64 },
    DownUpScale { factor: f64 },
    Jpeg { quality: u8 },
}

impl Augmentation {
    pub fn kind(&self) -> OpKind {
        match self {
            Augmentation::Hflip => OpKind::Hflip,
            Augmentation::Vflip => OpKind::Vflip,
            Augmentation::Rot90 { .. } => OpKind::Rot90,
            Augmentation::HistEq => OpKind::HistEq,
            Augmentation::Blur { .. } => OpKind::Blur,
            Augmentation::Brightness { .. } => OpKind::Brightness,
            Augmentation::Contrast { .. } => OpKind::Contrast,
            Augmentation::Color { .. } => OpKind::Color,
            Augmentation::Saturation { .. } => OpKind::Saturation,
            Augmentation::DownUpScale { .. } => OpKind::DownUpScale,
            Augmentation::Jpeg { .. } => OpKind::Jpeg,
        }
    }

    pub fn apply(&self, image: &ImageBuffer) -> Result<ImageBuffer, AugmentError> {
        match *self {
            Augmentation::Hflip => Ok(hflip(image)),
            Augmentation::Vflip => Ok(vflip(image)),
            Augmentation::Rot90 { k } => Ok(rot90(image, u32::from(k))),
            Augmentation::HistEq => Ok(hist_eq(image)),
            Augmentation::Blur { radius } => Ok(blur(image, radius)),
            Augmentation::Brightness { delta } => brightness(image, delta),
            Augmentation::Contrast { delta } => contrast(image, delta),
            Augmentation::Color { delta } => color(image, delta),
            Augmentation::Saturation { delta } => saturation(image, delta),
            Augmentation::DownUpScale { factor } => down_up_scale(image, factor),
            Augmentation::Jpeg { quality } => jpeg_roundtrip(image, quality),
        }
    }
}

/// Per-operation application probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpProbabilities {
    pub hflip: f64,
    pub vflip: f64,
    pub rot90: f64,
    pub hist_eq: f64,
    pub blur: f64,
    pub brightness: f64,
    pub contrast: f64,
    pub color: f64,
    pub saturation: f64,
    pub down_up_scale: f64,
    pub jpeg: f64,
}

impl Default for OpProbabilities {
    fn default() -> Self {
        Self {
            hflip: 0.5,
            vflip: 0.5,
            rot90: 0.5,
            hist_eq: 0.5,
            blur: 0.5,
            brightness: 0.5,
            contrast: 0.5,
            color: 0.5,
            saturation: 0.5,
            down_up_scale: 0.5,
            jpeg: 0.7,
        }
    }
}

impl OpProbabilities {
    pub fn uniform(p: f64) -> Self {
        Self {
            hflip: p,
            vflip: p,
            rot90: p,
            hist_eq: p,
            blur: p,
            brightness: p,
            contrast: p,
            color: p,
            saturation: p,
            down_up_scale: p,
            jpeg: p,
        }
    }

    pub fn get(&self, op: OpKind) -> f64 {
        *self.slot(op)
    }

    pub fn set(&mut self, op: OpKind, p: f64) {
        *self.slot_mut(op) = p;
    }

    fn slot(&self, op: OpKind) -> &f64 {
        match op {
            OpKind::Hflip => &self.hflip,
            OpKind::Vflip => &self.vflip,
            OpKind::Rot90 => &self.rot90,
            OpKind::HistEq => &self.hist_eq,
            OpKind::Blur => &self.blur,
            OpKind::Brightness => &self.brightness,
            OpKind::Contrast => &self.contrast,
            OpKind::Color => &self.color,
            OpKind::Saturation => &self.saturation,
            OpKind::DownUpScale => &self.down_up_scale,
            OpKind::Jpeg => &self.jpeg,
        }
    }

    fn slot_mut(&mut self, op: OpKind) -> &mut f64 {
        match op {
            OpKind::Hflip => &mut self.hflip,
            OpKind::Vflip => &mut self.vflip,
            OpKind::Rot90 => &mut self.rot90,
            OpKind::HistEq => &mut self.hist_eq,
            OpKind::Blur => &mut self.blur,
            OpKind::Brightness => &mut self.brightness,
            OpKind::Contrast => &mut self.contrast,
            OpKind::Color => &mut self.color,
            OpKind::Saturation => &mut self.saturation,
            OpKind::DownUpScale => &mut self.down_up_scale,
            OpKind::Jpeg => &mut self.jpeg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationConfig {
    pub probabilities: OpProbabilities,
    /// Inclusive JPEG quality interval.
    pub jpeg_quality_range: [u8; 2],
    /// Inclusive box-blur radius interval.
    pub blur_radius_range: [u32; 2],
    /// Brightness and contrast factors are drawn from `1 ± limit`.
    pub brightness_limit: f64,
    pub contrast_limit: f64,
    pub saturation_limit: f64,
    /// Hue rotation limit, in turns.
    pub color_limit: f64,
    /// Inclusive downscale factor interval.
    pub downscale_range: [f64; 2],
    pub seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            probabilities: OpProbabilities::default(),
            jpeg_quality_range: [30, 100],
            blur_radius_range: [1, 3],
            brightness_limit: 0.2,
            contrast_limit: 0.2,
            saturation_limit: 0.2,
            color_limit: 0.2,
            downscale_range: [0.25, 0.5],
            seed: 0,
        }
    }
}

impl AugmentationConfig {
    /// A configuration that never applies anything.
    pub fn disabled() -> Self {
        Self {
            probabilities: OpProbabilities::uniform(0.0),
            ..Self::default()
        }
    }

    pub fn with_probability(mut self, op: OpKind, p: f64) -> Self {
        self.probabilities.set(op, p);
        self
    }

    /// The random stream for the item identified by `key`.
    pub fn stream(&self, key: &str) -> crate::seed::Stream {
        crate::seed::stream(self.seed, key)
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        for op in OpKind::PIPELINE {
            let p = self.probabilities.get(op);
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(op.name(), format!("probability {p} outside [0, 1]")));
            }
        }
        let [q_lo, q_hi] = self.jpeg_quality_range;
        if q_lo < 1 || q_hi > 100 || q_lo > q_hi {
            return Err(invalid("jpeg", format!("quality range [{q_lo}, {q_hi}] not within [1, 100]")));
        }
        let [r_lo, r_hi] = self.blur_radius_range;
        if r_lo < 1 || r_lo > r_hi {
            return Err(invalid("blur", format!("radius range [{r_lo}, {r_hi}]")));
        }
        for (op, limit) in [
            ("brightness", self.brightness_limit),
            ("contrast", self.contrast_limit),
            ("saturation", self.saturation_limit),
        ] {
            if !(0.0..=1.0).contains(&limit) {
                return Err(invalid(op, format!("limit {limit} outside [0, 1]")));
            }
        }
        if !(0.0..=0.5).contains(&self.color_limit) {
            return Err(invalid("color", format!("limit {} outside [0, 0.5]", self.color_limit)));
        }
        let [d_lo, d_hi] = self.downscale_range;
        if !(d_lo > 0.0 && d_lo <= d_hi && d_hi <= 1.0) {
            return Err(invalid("down_up_scale", format!("factor range [{d_lo}, {d_hi}]")));
        }
        Ok(())
    }

    fn sample_step<R: Rng + ?Sized>(&self, op: OpKind, rng: &mut R) -> Augmentation {
        fn symmetric<R: Rng + ?Sized>(rng: &mut R, limit: f64) -> f64 {
            if limit == 0.0 {
                0.0
            } else {
                rng.random_range(-limit..=limit)
            }
        }
        match op {
            OpKind::Hflip => Augmentation::Hflip,
            OpKind::Vflip => Augmentation::Vflip,
            OpKind::Rot90 => Augmentation::Rot90 {
                k: rng.random_range(1..=3),
            },
            OpKind::HistEq => Augmentation::HistEq,
            OpKind::Blur => Augmentation::Blur {
                radius: rng.random_range(self.blur_radius_range[0]..=self.blur_radius_range[1]),
            },
            OpKind::Brightness => Augmentation::Brightness {
                delta: symmetric(rng, self.brightness_limit),
            },
            OpKind::Contrast => Augmentation::Contrast {
                delta: symmetric(rng, self.contrast_limit),
            },
            OpKind::Color => Augmentation::Color {
                delta: symmetric(rng, self.color_limit),
            },
            OpKind::Saturation => Augmentation::Saturation {
                delta: symmetric(rng, self.saturation_limit),
            },
            OpKind::DownUpScale => Augmentation::DownUpScale {
                factor: rng.random_range(self.downscale_range[0]..=self.downscale_range[1]),
            },
            OpKind::Jpeg => Augmentation::Jpeg {
                quality: rng.random_range(self.jpeg_quality_range[0]..=self.jpeg_quality_range[1]),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    #[serde(flatten)]
    pub step: Augmentation,
    pub applied: bool,
}

/// Every gating decision of one pipeline run, in pipeline order.
///
/// Parameters are drawn for every stage, applied or not, so the number of
/// random draws per run does not depend on the gate outcomes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AugmentationLog(pub Vec<LogEntry>);

impl AugmentationLog {
    pub fn entries(&self) -> &[LogEntry] {
        &self.0
    }

    pub fn applied(&self) -> impl Iterator<Item = &Augmentation> {
        self.0.iter().filter(|e| e.applied).map(|e| &e.step)
    }

    pub fn was_applied(&self, op: OpKind) -> bool {
        self.0.iter().any(|e| e.applied && e.step.kind() == op)
    }

    /// Re-applies the recorded edits to the original image.
    pub fn replay(&self, image: &ImageBuffer) -> Result<ImageBuffer, AugmentError> {
        self.applied()
            .try_fold(image.clone(), |img, step| step.apply(&img))
    }
}

/// Runs every stage of the pipeline, gating each with its probability.
pub fn apply_pipeline<R: Rng + ?Sized>(
    image: &ImageBuffer,
    config: &AugmentationConfig,
    rng: &mut R,
) -> Result<(ImageBuffer, AugmentationLog), AugmentError> {
    config.validate()?;
    let mut current = image.clone();
    let mut log = Vec::with_capacity(OpKind::PIPELINE.len());
    for op in OpKind::PIPELINE {
        let applied = rng.random_bool(config.probabilities.get(op));
        let step = config.sample_step(op, rng);
        if applied {
            current = step.apply(&current)?;
        }
        log.push(LogEntry { step, applied });
    }
    Ok((current, AugmentationLog(log)))
}

fn map_pixels(width: u32, height: u32, f: impl Fn(u32, u32) -> [u8; 3]) -> ImageBuffer {
    ImageBuffer::from_fn(width, height, f).expect("dimensions come from a valid image")
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn luma(p: [u8; 3]) -> f64 {
    0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])
}

pub fn hflip(image: &ImageBuffer) -> ImageBuffer {
    let w = image.width();
    map_pixels(w, image.height(), |x, y| image.pixel(w - 1 - x, y))
}

pub fn vflip(image: &ImageBuffer) -> ImageBuffer {
    let h = image.height();
    map_pixels(image.width(), h, |x, y| image.pixel(x, h - 1 - y))
}

/// Rotates counterclockwise by `k` quarter turns.
pub fn rot90(image: &ImageBuffer, k: u32) -> ImageBuffer {
    let (w, h) = (image.width(), image.height());
    match k % 4 {
        0 => image.clone(),
        // Output pixel (x, y) of a counterclockwise turn reads (w-1-y, x).
        1 => map_pixels(h, w, |x, y| image.pixel(w - 1 - y, x)),
        2 => map_pixels(w, h, |x, y| image.pixel(w - 1 - x, h - 1 - y)),
        _ => map_pixels(h, w, |x, y| image.pixel(y, h - 1 - x)),
    }
}

/// Per-channel histogram equalization. Constant channels are left as-is.
pub fn hist_eq(image: &ImageBuffer) -> ImageBuffer {
    let mut luts = [[0u8; 256]; 3];
    let total = u64::from(image.width()) * u64::from(image.height());
    for (c, lut) in luts.iter_mut().enumerate() {
        let mut hist = [0u64; 256];
        for px in image.pixels() {
            hist[px[c] as usize] += 1;
        }
        let first = hist.iter().position(|&n| n > 0).unwrap_or(0);
        if hist[first] == total {
            for (i, v) in lut.iter_mut().enumerate() {
                *v = i as u8;
            }
            continue;
        }
        let scale = 255.0 / (total - hist[first]) as f64;
        let mut cum = 0u64;
        for i in first + 1..256 {
            cum += hist[i];
            lut[i] = to_u8(cum as f64 * scale);
        }
    }
    let data = image
        .as_raw()
        .chunks_exact(3)
        .flat_map(|p| [luts[0][p[0] as usize], luts[1][p[1] as usize], luts[2][p[2] as usize]])
        .collect();
    ImageBuffer::new(image.width(), image.height(), data).expect("same dimensions")
}

/// Box blur with a `(2r+1)`-square kernel and replicated borders.
pub fn blur(image: &ImageBuffer, radius: u32) -> ImageBuffer {
    if radius == 0 {
        return image.clone();
    }
    let (w, h) = (image.width() as i64, image.height() as i64);
    let r = i64::from(radius);
    let clamp = |v: i64, hi: i64| v.clamp(0, hi - 1) as usize;
    let src = image.as_raw();

    let mut horiz = vec![0u32; src.len()];
    for y in 0..h as usize {
        for x in 0..w {
            for c in 0..3 {
                let sum: u32 = (-r..=r)
                    .map(|d| u32::from(src[(y * w as usize + clamp(x + d, w)) * 3 + c]))
                    .sum();
                horiz[(y * w as usize + x as usize) * 3 + c] = sum;
            }
        }
    }
    let area = ((2 * r + 1) * (2 * r + 1)) as u32;
    let mut out = vec![0u8; src.len()];
    for y in 0..h {
        for x in 0..w as usize {
            for c in 0..3 {
                let sum: u32 = (-r..=r)
                    .map(|d| horiz[(clamp(y + d, h) * w as usize + x) * 3 + c])
                    .sum();
                out[(y as usize * w as usize + x) * 3 + c] = ((sum + area / 2) / area) as u8;
            }
        }
    }
    ImageBuffer::new(image.width(), image.height(), out).expect("same dimensions")
}

fn check_delta(op: &'static str, delta: f64) -> Result<(), AugmentError> {
    if !delta.is_finite() || delta < -1.0 {
        return Err(invalid(op, format!("delta {delta} must be finite and >= -1")));
    }
    Ok(())
}

/// Scales every channel by `1 + delta`.
pub fn brightness(image: &ImageBuffer, delta: f64) -> Result<ImageBuffer, AugmentError> {
    check_delta("brightness", delta)?;
    let factor = 1.0 + delta;
    let data = image.as_raw().iter().map(|&v| to_u8(f64::from(v) * factor)).collect();
    Ok(ImageBuffer::new(image.width(), image.height(), data).expect("same dimensions"))
}

/// Blends every channel with the image's mean luma by `1 + delta`.
pub fn contrast(image: &ImageBuffer, delta: f64) -> Result<ImageBuffer, AugmentError> {
    check_delta("contrast", delta)?;
    let factor = 1.0 + delta;
    let n = f64::from(image.width()) * f64::from(image.height());
    let mean = image.pixels().map(luma).sum::<f64>() / n;
    let data = image
        .as_raw()
        .iter()
        .map(|&v| to_u8(mean + (f64::from(v) - mean) * factor))
        .collect();
    Ok(ImageBuffer::new(image.width(), image.height(), data).expect("same dimensions"))
}

/// Blends every pixel with its own luma by `1 + delta`.
pub fn saturation(image: &ImageBuffer, delta: f64) -> Result<ImageBuffer, AugmentError> {
    check_delta("saturation", delta)?;
    let factor = 1.0 + delta;
    let data = image
        .pixels()
        .flat_map(|p| {
            let gray = luma(p);
            p.map(|v| to_u8(gray + (f64::from(v) - gray) * factor))
        })
        .collect();
    Ok(ImageBuffer::new(image.width(), image.height(), data).expect("same dimensions"))
}

/// Rotates hue by `delta` turns in HSV space.
pub fn color(image: &ImageBuffer, delta: f64) -> Result<ImageBuffer, AugmentError> {
    if !delta.is_finite() || delta.abs() > 0.5 {
        return Err(invalid("color", format!("hue shift {delta} outside [-0.5, 0.5]")));
    }
    if delta == 0.0 {
        return Ok(image.clone());
    }
    let data = image
        .pixels()
        .flat_map(|p| {
            let (h, s, v) = rgb_to_hsv(p);
            hsv_to_rgb((h + delta).rem_euclid(1.0), s, v)
        })
        .collect();
    Ok(ImageBuffer::new(image.width(), image.height(), data).expect("same dimensions"))
}

fn rgb_to_hsv(p: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = p.map(|v| f64::from(v) / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    let hue = if chroma == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / chroma).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / chroma + 2.0) / 6.0
    } else {
        ((r - g) / chroma + 4.0) / 6.0
    };
    let sat = if max == 0.0 { 0.0 } else { chroma / max };
    (hue, sat, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let sector = h * 6.0;
    let chroma = v * s;
    let x = chroma * (1.0 - (sector.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match sector as u32 {
        0 => (chroma, x, 0.0),
        1 => (x, chroma, 0.0),
        2 => (0.0, chroma, x),
        3 => (0.0, x, chroma),
        4 => (x, 0.0, chroma),
        _ => (chroma, 0.0, x),
    };
    let m = v - chroma;
    [r, g, b].map(|c| to_u8((c + m) * 255.0))
}

/// Bilinear resize with half-pixel centres.
pub fn resize_bilinear(image: &ImageBuffer, width: u32, height: u32) -> ImageBuffer {
    if (width, height) == (image.width(), image.height()) {
        return image.clone();
    }
    let axis = |dst: u32, src_len: u32, dst_len: u32| {
        let scale = f64::from(src_len) / f64::from(dst_len);
        let pos = ((f64::from(dst) + 0.5) * scale - 0.5).clamp(0.0, f64::from(src_len - 1));
        let lo = pos.floor() as u32;
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, pos - f64::from(lo))
    };
    let xs: Vec<_> = (0..width).map(|x| axis(x, image.width(), width)).collect();
    let ys: Vec<_> = (0..height).map(|y| axis(y, image.height(), height)).collect();
    map_pixels(width, height, |x, y| {
        let (x0, x1, fx) = xs[x as usize];
        let (y0, y1, fy) = ys[y as usize];
        let (a, b, c, d) = (image.pixel(x0, y0), image.pixel(x1, y0), image.pixel(x0, y1), image.pixel(x1, y1));
        std::array::from_fn(|ch| {
            let top = f64::from(a[ch]) * (1.0 - fx) + f64::from(b[ch]) * fx;
            let bottom = f64::from(c[ch]) * (1.0 - fx) + f64::from(d[ch]) * fx;
            to_u8(top * (1.0 - fy) + bottom * fy)
        })
    })
}

/// Downscales by `factor` and resizes back to the original dimensions.
pub fn down_up_scale(image: &ImageBuffer, factor: f64) -> Result<ImageBuffer, AugmentError> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(invalid("down_up_scale", format!("factor {factor} outside (0, 1]")));
    }
    let (w, h) = (image.width(), image.height());
    let small_w = ((f64::from(w) * factor).round() as u32).max(1);
    let small_h = ((f64::from(h) * factor).round() as u32).max(1);
    let small = resize_bilinear(image, small_w, small_h);
    Ok(resize_bilinear(&small, w, h))
}

/// Encodes to baseline JPEG at `quality` and decodes back.
pub fn jpeg_roundtrip(image: &ImageBuffer, quality: u8) -> Result<ImageBuffer, AugmentError> {
    if !(1..=100).contains(&quality) {
        return Err(invalid("jpeg", format!("quality {quality} outside [1, 100]")));
    }
    let mut encoded = Vec::new();
    JpegEncoder::new_with_quality(&mut encoded, quality)
        .encode(image.as_raw(), image.width(), image.height(), ExtendedColorType::Rgb8)
        .map_err(|e| AugmentError::CodecFailure(e.to_string()))?;
    let decoded = image::load(Cursor::new(encoded), ImageFormat::Jpeg)
        .map_err(|e| AugmentError::CodecFailure(e.to_string()))?
        .to_rgb8();
    ImageBuffer::try_from(decoded).map_err(|e| AugmentError::CodecFailure(e.to_string()))
}
