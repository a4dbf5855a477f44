//! 8-bit raster images and the four perturbation kinds.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl RasterImage {
    /// `pixels` is row-major, channels interleaved.
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::UnsupportedChannels(channels));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!("image dimensions must be positive, got {width}x{height}")));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::LengthMismatch {
                left: pixels.len(),
                right: width * height * channels,
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    GaussianNoise,
    BoxBlur,
    RectOcclusion,
    SaltPepper,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 4] = [
        PerturbationKind::GaussianNoise,
        PerturbationKind::BoxBlur,
        PerturbationKind::RectOcclusion,
        PerturbationKind::SaltPepper,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PerturbationKind::GaussianNoise => "gaussian_noise",
            PerturbationKind::BoxBlur => "box_blur",
            PerturbationKind::RectOcclusion => "rect_occlusion",
            PerturbationKind::SaltPepper => "salt_pepper",
        }
    }

    /// How `level` maps to the transform parameter.
    pub fn parameter_map(self) -> &'static str {
        match self {
            PerturbationKind::GaussianNoise => "additive noise sigma = 64*level (8-bit units)",
            PerturbationKind::BoxBlur => "box radius = round(6*level) px, edges replicated",
            PerturbationKind::RectOcclusion => "one black rectangle covering 0.25*level of the area",
            PerturbationKind::SaltPepper => "round(0.1*level*pixels) pixels set to 0 or 255",
        }
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PerturbationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        PerturbationKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown perturbation kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    /// Strength in `[0, 1]`; zero is the identity for every kind.
    pub level: f64,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(kind: PerturbationKind, level: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&level) {
            return Err(Error::InvalidArgument(format!("perturbation level must be in [0, 1], got {level}")));
        }
        Ok(Self { kind, level, seed })
    }
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub fn apply_perturbation(img: &RasterImage, spec: &PerturbationSpec) -> Result<RasterImage> {
    if img.channels != 1 && img.channels != 3 {
        return Err(Error::UnsupportedChannels(img.channels));
    }
    if !(0.0..=1.0).contains(&spec.level) {
        return Err(Error::InvalidArgument(format!("perturbation level must be in [0, 1], got {}", spec.level)));
    }
    if spec.level == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = rng::stream(spec.seed, &[]);
    let mut out = img.clone();
    match spec.kind {
        PerturbationKind::GaussianNoise => {
            let sigma = 64.0 * spec.level;
            for p in out.pixels.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *p = to_u8(*p as f64 + sigma * z);
            }
        }
        PerturbationKind::BoxBlur => {
            let radius = (6.0 * spec.level).round() as usize;
            if radius > 0 {
                out = box_blur(img, radius);
            }
        }
        PerturbationKind::RectOcclusion => {
            let side = (0.25 * spec.level).sqrt();
            let w = (img.width as f64 * side).round() as usize;
            let h = (img.height as f64 * side).round() as usize;
            if w > 0 && h > 0 {
                let x0 = rng::below(&mut rng, (img.width - w + 1) as u64) as usize;
                let y0 = rng::below(&mut rng, (img.height - h + 1) as u64) as usize;
                for y in y0..y0 + h {
                    for x in x0..x0 + w {
                        for c in 0..img.channels {
                            let i = out.index(x, y, c);
                            out.pixels[i] = 0;
                        }
                    }
                }
            }
        }
        PerturbationKind::SaltPepper => {
            let n = img.width * img.height;
            let count = (0.1 * spec.level * n as f64).round() as usize;
            for pos in rng::sample_indices(&mut rng, n, count) {
                let value = if rng::below(&mut rng, 2) == 0 { 0 } else { 255 };
                for c in 0..img.channels {
                    out.pixels[pos * img.channels + c] = value;
                }
            }
        }
    }
    Ok(out)
}

/// Separable mean filter over a `(2r+1)²` window with replicated borders.
fn box_blur(img: &RasterImage, radius: usize) -> RasterImage {
    let (w, h, ch) = (img.width, img.height, img.channels);
    let r = radius as isize;
    let norm = (2 * radius + 1) as f64;
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;

    let mut horizontal = vec![0.0f64; w * h * ch];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let s: f64 = (-r..=r)
                    .map(|dx| img.get(clamp(x as isize + dx, w), y, c) as f64)
                    .sum();
                horizontal[(y * w + x) * ch + c] = s / norm;
            }
        }
    }
    let mut pixels = vec![0u8; w * h * ch];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let s: f64 = (-r..=r)
                    .map(|dy| horizontal[(clamp(y as isize + dy, h) * w + x) * ch + c])
                    .sum();
                pixels[(y * w + x) * ch + c] = to_u8(s / norm);
            }
        }
    }
    RasterImage {
        width: w,
        height: h,
        channels: ch,
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: usize, h: usize, ch: usize) -> RasterImage {
        let pixels = (0..w * h * ch).map(|i| ((i * 37) % 256) as u8).collect();
        RasterImage::new(w, h, ch, pixels).unwrap()
    }

    #[test]
    fn level_zero_is_identity_for_every_kind() {
        let img = gradient(9, 7, 3);
        for kind in PerturbationKind::ALL {
            let out = apply_perturbation(&img, &PerturbationSpec::new(kind, 0.0, 5).unwrap()).unwrap();
            assert_eq!(out, img, "{kind}");
        }
    }

    #[test]
    fn blur_keeps_constant_images() {
        let img = RasterImage::filled(10, 6, 1, 131).unwrap();
        for level in [0.1, 0.5, 1.0] {
            let out = apply_perturbation(&img, &PerturbationSpec::new(PerturbationKind::BoxBlur, level, 0).unwrap()).unwrap();
            assert_eq!(out, img);
        }
    }

    #[test]
    fn noise_matches_folded_normal_mean() {
        // Oracle: E|round(N(0, 32²))| = 25.531 (25.532 without rounding), computed
        // by summing the discretized normal; clamping is negligible at mid-gray.
        let img = RasterImage::filled(8, 8, 1, 128).unwrap();
        let spec = PerturbationSpec::new(PerturbationKind::GaussianNoise, 0.5, 4).unwrap();
        let out = apply_perturbation(&img, &spec).unwrap();
        let mad = out.pixels().iter().map(|&p| (p as f64 - 128.0).abs()).sum::<f64>() / 64.0;
        assert!((mad / 25.531 - 1.0).abs() < 0.2, "mean abs change {mad}");
    }

    #[test]
    fn perturbations_are_deterministic_and_sized() {
        let img = gradient(16, 12, 3);
        for kind in PerturbationKind::ALL {
            let spec = PerturbationSpec::new(kind, 0.7, 99).unwrap();
            let a = apply_perturbation(&img, &spec).unwrap();
            let b = apply_perturbation(&img, &spec).unwrap();
            assert_eq!(a, b);
            assert_eq!((a.width(), a.height(), a.channels()), (16, 12, 3));
            assert_ne!(a, img, "{kind} at 0.7 should change the image");
        }
    }

    #[test]
    fn occlusion_area_and_salt_pepper_count() {
        let img = RasterImage::filled(20, 20, 1, 200).unwrap();
        let occ = apply_perturbation(&img, &PerturbationSpec::new(PerturbationKind::RectOcclusion, 1.0, 1).unwrap()).unwrap();
        assert_eq!(occ.pixels().iter().filter(|&&p| p == 0).count(), 100);

        let sp = apply_perturbation(&img, &PerturbationSpec::new(PerturbationKind::SaltPepper, 0.5, 2).unwrap()).unwrap();
        assert_eq!(sp.pixels().iter().filter(|&&p| p != 200).count(), 20);
    }

    #[test]
    fn validation() {
        assert!(matches!(RasterImage::new(2, 2, 4, vec![0; 16]), Err(Error::UnsupportedChannels(4))));
        assert!(PerturbationSpec::new(PerturbationKind::BoxBlur, 1.5, 0).is_err());
        assert_eq!("salt-pepper".parse::<PerturbationKind>().unwrap(), PerturbationKind::SaltPepper);
    }
}
