//! Metric consistency under increasing image perturbations.
//!
//! A sweep perturbs every image at each level, embeds clean and perturbed
//! images with the bundled toy extractor and scores the perturbed set against
//! the clean reference. A consistent metric grows with the level.

pub mod image;
pub mod pnm;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use image::{apply_perturbation, PerturbationKind, PerturbationSpec, RasterImage};

use crate::error::{Error, Result};
use crate::fid_infinity::{fid_infinity, ExtrapolationConfig};
use crate::metric::{artfid, toy_content_distances};
use crate::rng;
use crate::stats::{fid, mean_stddev, EmbeddingSet};

const GRID: usize = 4;

/// Length of the toy feature vector for an image with `channels` channels.
pub fn toy_embedding_dim(channels: usize) -> usize {
    channels * (GRID * GRID + 3)
}

/// Deterministic hand-crafted features, per channel: 4×4 grid of cell means,
/// global standard deviation, and mean absolute horizontal and vertical
/// differences. All scaled to `[0, 1]` by dividing by 255.
pub fn toy_embedding(img: &RasterImage) -> Vec<f64> {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut features = Vec::with_capacity(toy_embedding_dim(ch));
    for c in 0..ch {
        let mut cells = [0.0f64; GRID * GRID];
        let mut counts = [0usize; GRID * GRID];
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                let v = img.get(x, y, c) as f64 / 255.0;
                let cell = (y * GRID / h) * GRID + x * GRID / w;
                cells[cell] += v;
                counts[cell] += 1;
                sum += v;
                sum_sq += v * v;
            }
        }
        for (s, n) in cells.iter().zip(counts) {
            features.push(if n > 0 { s / n as f64 } else { 0.0 });
        }
        let n = (w * h) as f64;
        let mean = sum / n;
        features.push((sum_sq / n - mean * mean).max(0.0).sqrt());

        let mut dx = 0.0;
        for y in 0..h {
            for x in 1..w {
                dx += (img.get(x, y, c) as f64 - img.get(x - 1, y, c) as f64).abs();
            }
        }
        let mut dy = 0.0;
        for y in 1..h {
            for x in 0..w {
                dy += (img.get(x, y, c) as f64 - img.get(x, y - 1, c) as f64).abs();
            }
        }
        features.push(if w > 1 { dx / (((w - 1) * h) as f64 * 255.0) } else { 0.0 });
        features.push(if h > 1 { dy / ((w * (h - 1)) as f64 * 255.0) } else { 0.0 });
    }
    features
}

pub fn toy_embeddings(images: &[RasterImage], tag: &str) -> Result<EmbeddingSet> {
    let first = images
        .first()
        .ok_or_else(|| Error::EmptyInput("image list".into()))?;
    let d = toy_embedding_dim(first.channels());
    let rows: Vec<Vec<f64>> = images.par_iter().map(toy_embedding).collect();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: r.len(),
        });
    }
    EmbeddingSet::from_rows(&rows, tag)
}

/// Procedural grayscale test images: a tilted brightness ramp with a few
/// soft-edged discs and fine texture. Image `i` depends only on `(seed, i)`.
pub fn toy_images(count: usize, width: usize, height: usize, seed: u64) -> Result<Vec<RasterImage>> {
    (0..count)
        .map(|i| {
            let mut r = rng::stream(seed, &[i as u64]);
            let mut unit = || rng::below(&mut r, 1 << 24) as f64 / (1u64 << 24) as f64;
            let base = 60.0 + 120.0 * unit();
            let (gx, gy) = (unit() * 80.0 - 40.0, unit() * 80.0 - 40.0);
            let discs: Vec<(f64, f64, f64, f64)> = (0..3)
                .map(|_| (unit(), unit(), 0.08 + 0.2 * unit(), unit() * 120.0 - 60.0))
                .collect();
            let texture = 6.0 + 10.0 * unit();
            let phase = unit() * std::f64::consts::TAU;
            let mut pixels = Vec::with_capacity(width * height);
            for y in 0..height {
                for x in 0..width {
                    let (u, v) = (x as f64 / width as f64, y as f64 / height as f64);
                    let mut p = base + gx * (u - 0.5) + gy * (v - 0.5);
                    for &(cx, cy, rad, amp) in &discs {
                        let d = ((u - cx).powi(2) + (v - cy).powi(2)).sqrt();
                        p += amp * (1.0 - ((d - rad) / 0.03).clamp(0.0, 1.0));
                    }
                    p += texture * ((x as f64 * 1.7 + phase).sin() * (y as f64 * 1.3 - phase).cos());
                    pixels.push(p.round().clamp(0.0, 255.0) as u8);
                }
            }
            RasterImage::new(width, height, 1, pixels)
        })
        .collect()
}

/// Perturbs each image with a per-image seed `derive_seed(spec.seed, [i])`.
pub fn perturb_all(images: &[RasterImage], spec: &PerturbationSpec) -> Result<Vec<RasterImage>> {
    images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            let per_image = PerturbationSpec {
                seed: rng::derive_seed(spec.seed, &[i as u64]),
                ..*spec
            };
            apply_perturbation(img, &per_image)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMetric {
    Fid,
    FidInfinity,
    ArtFid,
    #[default]
    ArtFidInfinity,
}

impl SweepMetric {
    pub fn name(self) -> &'static str {
        match self {
            SweepMetric::Fid => "fid",
            SweepMetric::FidInfinity => "fid_infinity",
            SweepMetric::ArtFid => "artfid",
            SweepMetric::ArtFidInfinity => "artfid_infinity",
        }
    }
}

impl std::str::FromStr for SweepMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        [SweepMetric::Fid, SweepMetric::FidInfinity, SweepMetric::ArtFid, SweepMetric::ArtFidInfinity]
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown sweep metric '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub kind: PerturbationKind,
    /// Strictly increasing, starting at 0.
    pub levels: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub metric: SweepMetric,
    /// Used by the extrapolated metrics; its seed is replaced per trial.
    pub extrapolation: ExtrapolationConfig,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::EmptyInput("perturbation levels".into()));
        }
        if self.levels[0] != 0.0 {
            return Err(Error::InvalidArgument("perturbation levels must start at 0".into()));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("perturbation levels must be strictly increasing".into()));
        }
        if let Some(l) = self.levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::InvalidArgument(format!("perturbation level {l} outside [0, 1]")));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        Ok(())
    }

    /// Seed for the perturbation draws of `trial` (shared by all levels).
    pub fn perturbation_seed(&self, trial: usize) -> u64 {
        rng::derive_seed(self.seed, &[trial as u64, 0])
    }

    /// Seed for the metric's subsampling in `trial` (shared by all levels).
    pub fn metric_seed(&self, trial: usize) -> u64 {
        rng::derive_seed(self.seed, &[trial as u64, 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub level: f64,
    pub trial: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub level: f64,
    pub mean: f64,
    /// Sample standard deviation over trials; zero for a single trial.
    pub stddev: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub kind: PerturbationKind,
    pub metric: SweepMetric,
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummary>,
}

/// Scores `generated` against the clean `reference`/`content` embeddings.
pub fn sweep_metric_value(
    metric: SweepMetric,
    reference: &EmbeddingSet,
    content: &EmbeddingSet,
    generated: &EmbeddingSet,
    extrapolation: &ExtrapolationConfig,
) -> Result<f64> {
    Ok(match metric {
        SweepMetric::Fid => fid(reference, generated)?,
        SweepMetric::FidInfinity => fid_infinity(reference, generated, extrapolation)?.intercept,
        SweepMetric::ArtFid => artfid(&toy_content_distances(content, generated)?, reference, generated, None)?.artfid,
        SweepMetric::ArtFidInfinity => artfid(
            &toy_content_distances(content, generated)?,
            reference,
            generated,
            Some(extrapolation),
        )?
        .artfid_infinity
        .expect("extrapolation requested"),
    })
}

/// Runs the sweep. `reference` defaults to the clean `images`.
pub fn perturbation_sweep(
    images: &[RasterImage],
    reference: Option<&[RasterImage]>,
    cfg: &SweepConfig,
) -> Result<SweepTable> {
    cfg.validate()?;
    let content = toy_embeddings(images, "toy:clean")?;
    let reference = match reference {
        Some(r) => toy_embeddings(r, "toy:reference")?,
        None => content.clone(),
    };

    let mut rows = Vec::with_capacity(cfg.levels.len() * cfg.trials);
    for trial in 0..cfg.trials {
        let extrapolation = ExtrapolationConfig {
            seed: cfg.metric_seed(trial),
            ..cfg.extrapolation
        };
        for &level in &cfg.levels {
            let spec = PerturbationSpec::new(cfg.kind, level, cfg.perturbation_seed(trial))?;
            let perturbed = perturb_all(images, &spec)?;
            let generated = toy_embeddings(&perturbed, "toy:perturbed")?;
            let value = sweep_metric_value(cfg.metric, &reference, &content, &generated, &extrapolation)?;
            rows.push(SweepRow { level, trial, value });
        }
    }
    rows.sort_by(|a, b| a.level.total_cmp(&b.level).then(a.trial.cmp(&b.trial)));

    let summary = cfg
        .levels
        .iter()
        .map(|&level| {
            let values: Vec<f64> = rows.iter().filter(|r| r.level == level).map(|r| r.value).collect();
            let (mean, stddev) = mean_stddev(&values);
            SweepSummary {
                level,
                mean,
                stddev,
                trials: values.len(),
            }
        })
        .collect();

    Ok(SweepTable {
        kind: cfg.kind,
        metric: cfg.metric,
        rows,
        summary,
    })
}

/// FID between `reference` and `reference + σ·ε` for each σ, with one shared
/// standard-normal draw `ε` so the levels differ only in scale.
pub fn embedding_noise_sweep(reference: &EmbeddingSet, sigmas: &[f64], seed: u64) -> Result<Vec<f64>> {
    let mut r = rng::stream(seed, &[]);
    let noise: Vec<f64> = (0..reference.data().len())
        .map(|_| StandardNormal.sample(&mut r))
        .collect();
    sigmas
        .iter()
        .map(|&s| {
            let data = reference.data().iter().zip(&noise).map(|(x, e)| x + s * e).collect();
            let noisy = EmbeddingSet::new(reference.n_rows(), reference.n_cols(), data, "noisy")?;
            fid(reference, &noisy)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::spearman_rho;
    use crate::stats::{compute_stats, frechet_distance, GaussianStats};
    use nalgebra::DMatrix;

    fn small_cfg(levels: Vec<f64>, metric: SweepMetric) -> SweepConfig {
        SweepConfig {
            kind: PerturbationKind::GaussianNoise,
            levels,
            trials: 2,
            seed: 3,
            metric,
            extrapolation: ExtrapolationConfig {
                k_points: 5,
                min_subsample: 20,
                seed: 0,
                subsample_both: false,
            },
        }
    }

    #[test]
    fn toy_embedding_dims_and_range() {
        let imgs = toy_images(3, 24, 20, 1).unwrap();
        let e = toy_embeddings(&imgs, "t").unwrap();
        assert_eq!(e.n_cols(), toy_embedding_dim(1));
        assert!(e.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_ne!(e.row(0), e.row(1));
    }

    #[test]
    fn toy_images_deterministic() {
        assert_eq!(toy_images(2, 16, 16, 5).unwrap(), toy_images(2, 16, 16, 5).unwrap());
        assert_ne!(toy_images(1, 16, 16, 5).unwrap(), toy_images(1, 16, 16, 6).unwrap());
    }

    #[test]
    fn zero_only_sweep_equals_unperturbed_metric() {
        let imgs = toy_images(40, 16, 16, 2).unwrap();
        let cfg = small_cfg(vec![0.0], SweepMetric::ArtFidInfinity);
        let table = perturbation_sweep(&imgs, None, &cfg).unwrap();
        assert_eq!(table.rows.len(), 2);
        let clean = toy_embeddings(&imgs, "c").unwrap();
        for row in &table.rows {
            let x = ExtrapolationConfig {
                seed: cfg.metric_seed(row.trial),
                ..cfg.extrapolation
            };
            let direct = sweep_metric_value(cfg.metric, &clean, &clean, &clean, &x).unwrap();
            assert_eq!(row.value.to_bits(), direct.to_bits());
        }
    }

    #[test]
    fn sweep_rejects_bad_levels() {
        let imgs = toy_images(5, 8, 8, 2).unwrap();
        for levels in [vec![], vec![0.1, 0.2], vec![0.0, 0.5, 0.5], vec![0.0, 1.5]] {
            assert!(perturbation_sweep(&imgs, None, &small_cfg(levels, SweepMetric::Fid)).is_err());
        }
    }

    #[test]
    fn sweep_is_deterministic_and_grows() {
        let imgs = toy_images(60, 16, 16, 4).unwrap();
        let cfg = small_cfg(vec![0.0, 0.3, 0.6, 1.0], SweepMetric::Fid);
        let a = perturbation_sweep(&imgs, None, &cfg).unwrap();
        assert_eq!(a, perturbation_sweep(&imgs, None, &cfg).unwrap());
        let means: Vec<f64> = a.summary.iter().map(|s| s.mean).collect();
        assert_eq!(means[0], 0.0);
        assert!(means.windows(2).all(|w| w[1] > w[0]), "{means:?}");
    }

    #[test]
    fn embedding_noise_tracks_closed_form() {
        // Oracle: FID(N(μ, Σ), N(μ, Σ + σ²I)) = Σ_i (√λ_i − √(λ_i + σ²))², λ from the sample Σ.
        let mut r = rng::stream(8, &[]);
        let n = 20_000;
        let data: Vec<f64> = (0..n * 3)
            .map(|i| {
                let z: f64 = StandardNormal.sample(&mut r);
                z * [1.0, 0.5, 2.0][i % 3]
            })
            .collect();
        let reference = EmbeddingSet::new(n, 3, data, "g").unwrap();
        let sigmas = [0.0, 0.25, 0.5, 1.0, 2.0];
        let measured = embedding_noise_sweep(&reference, &sigmas, 9).unwrap();
        assert_eq!(measured[0], 0.0);
        assert!(measured.windows(2).all(|w| w[1] > w[0]), "{measured:?}");

        let stats = compute_stats(&reference).unwrap();
        for (&s, &m) in sigmas.iter().zip(&measured).skip(1) {
            let shifted = GaussianStats::new(
                stats.mu().clone(),
                stats.sigma() + DMatrix::identity(3, 3) * (s * s),
                n,
            )
            .unwrap();
            let closed = frechet_distance(&stats, &shifted).unwrap();
            assert!((m / closed - 1.0).abs() < 0.1, "sigma {s}: {m} vs {closed}");
        }
    }

    #[test]
    fn monotone_trend_by_rank_correlation() {
        let imgs = toy_images(60, 16, 16, 9).unwrap();
        let cfg = small_cfg(vec![0.0, 0.25, 0.5, 0.75, 1.0], SweepMetric::ArtFid);
        let t = perturbation_sweep(&imgs, None, &cfg).unwrap();
        let levels: Vec<f64> = t.summary.iter().map(|s| s.level).collect();
        let means: Vec<f64> = t.summary.iter().map(|s| s.mean).collect();
        assert!(spearman_rho(&levels, &means).unwrap().rho >= 0.9);
    }
}
