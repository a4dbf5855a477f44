//! Bias-corrected FID by extrapolation to infinite sample size.
//!
//! FID computed from `M` samples carries a bias that is, to first order,
//! linear in `1/M`. The estimator evaluates FID at `K` evenly spaced subsample
//! sizes in `[min_subsample, N]`, fits a line through the `(1/M, FID_M)` points
//! and reports its value at `1/M = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{compute_stats, frechet_distance, EmbeddingSet, GaussianStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtrapolationConfig {
    /// Number of subsample sizes `K` before deduplication.
    pub k_points: usize,
    /// Smallest subsample size `M_1`.
    pub min_subsample: usize,
    pub seed: u64,
    /// Subsample the style set too instead of holding its statistics fixed.
    pub subsample_both: bool,
}

impl Default for ExtrapolationConfig {
    fn default() -> Self {
        Self {
            k_points: 15,
            min_subsample: 5000,
            seed: 0,
            subsample_both: false,
        }
    }
}

impl ExtrapolationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_points < 2 {
            return Err(Error::InvalidArgument(format!(
                "k_points must be at least 2, got {}",
                self.k_points
            )));
        }
        if self.min_subsample < 2 {
            return Err(Error::InvalidArgument(format!(
                "min_subsample must be at least 2, got {}",
                self.min_subsample
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationPoint {
    pub subsample_size: usize,
    /// `1 / subsample_size`, the regression abscissa.
    pub inverse_size: f64,
    pub fid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationTrace {
    pub points: Vec<ExtrapolationPoint>,
    pub slope: f64,
    /// The extrapolated FID at infinite sample size.
    pub intercept: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard errors under homoscedastic noise; `None` with fewer than three points.
    pub slope_stderr: Option<f64>,
    pub intercept_stderr: Option<f64>,
}

/// Ordinary least squares line through `points`.
pub fn ols_fit(points: &[(f64, f64)]) -> Result<LinearFit> {
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::RegressionDegenerate("non-finite point".into()));
    }
    let n = points.len();
    if n < 2 {
        return Err(Error::RegressionDegenerate(format!("need at least 2 points, got {n}")));
    }
    let nf = n as f64;
    let x_mean = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in points {
        let dx = x - x_mean;
        sxx += dx * dx;
        sxy += dx * (y - y_mean);
    }
    if sxx == 0.0 {
        return Err(Error::RegressionDegenerate("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;

    let (slope_stderr, intercept_stderr) = if n > 2 {
        let rss: f64 = points
            .iter()
            .map(|&(x, y)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .sum();
        let s2 = rss / (nf - 2.0);
        let se_slope = (s2 / sxx).sqrt();
        let se_intercept = (s2 * (1.0 / nf + x_mean * x_mean / sxx)).sqrt();
        (Some(se_slope), Some(se_intercept))
    } else {
        (None, None)
    };

    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        intercept_stderr,
    })
}

/// `k` evenly spaced values over `[min, n]`, rounded half away from zero,
/// deduplicated, ascending. The last value is always `n`.
pub fn subsample_sizes(min: usize, n: usize, k: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = (0..k)
        .map(|i| {
            if k == 1 {
                return n;
            }
            let t = i as f64 / (k - 1) as f64;
            (min as f64 + t * (n - min) as f64).round() as usize
        })
        .collect();
    sizes.dedup();
    sizes
}

/// Regression on already computed `(1/M, FID_M)` pairs.
pub fn extrapolate(points: Vec<ExtrapolationPoint>) -> Result<ExtrapolationTrace> {
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.inverse_size, p.fid)).collect();
    let fit = ols_fit(&xy)?;
    if !fit.intercept.is_finite() {
        return Err(Error::RegressionDegenerate("intercept is not finite".into()));
    }
    Ok(ExtrapolationTrace {
        points,
        slope: fit.slope,
        intercept: fit.intercept,
    })
}

/// Extrapolated FID between `style` and `generated`.
pub fn fid_infinity(
    style: &EmbeddingSet,
    generated: &EmbeddingSet,
    cfg: &ExtrapolationConfig,
) -> Result<ExtrapolationTrace> {
    let style_stats = if cfg.subsample_both {
        None
    } else {
        Some(compute_stats(style)?)
    };
    fid_infinity_inner(style, style_stats.as_ref(), generated, cfg)
}

/// Same as [`fid_infinity`] with precomputed full-set style statistics.
pub(crate) fn fid_infinity_inner(
    style: &EmbeddingSet,
    style_stats: Option<&GaussianStats>,
    generated: &EmbeddingSet,
    cfg: &ExtrapolationConfig,
) -> Result<ExtrapolationTrace> {
    cfg.validate()?;
    if style.n_cols() != generated.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: style.n_cols(),
            found: generated.n_cols(),
        });
    }
    let smallest = style.n_rows().min(generated.n_rows());
    if smallest < cfg.min_subsample {
        return Err(Error::InsufficientSamples {
            needed: cfg.min_subsample,
            available: smallest,
        });
    }
    let n = if cfg.subsample_both {
        smallest
    } else {
        generated.n_rows()
    };
    let sizes = subsample_sizes(cfg.min_subsample, n, cfg.k_points);
    if sizes.len() < 2 {
        return Err(Error::RegressionDegenerate(format!(
            "all subsample sizes collapse to {}",
            sizes[0]
        )));
    }

    let points = sizes
        .par_iter()
        .enumerate()
        .map(|(k, &m)| {
            let mut gen_rng = rng::stream(cfg.seed, &[k as u64, 0]);
            let sub_g = generated.select_rows(&rng::sample_indices(&mut gen_rng, generated.n_rows(), m))?;
            let g_stats = compute_stats(&sub_g)?;
            let fid = match style_stats {
                Some(s) if !cfg.subsample_both => frechet_distance(s, &g_stats)?,
                _ => {
                    let mut style_rng = rng::stream(cfg.seed, &[k as u64, 1]);
                    let sub_s = style.select_rows(&rng::sample_indices(&mut style_rng, style.n_rows(), m))?;
                    frechet_distance(&compute_stats(&sub_s)?, &g_stats)?
                }
            };
            Ok(ExtrapolationPoint {
                subsample_size: m,
                inverse_size: 1.0 / m as f64,
                fid,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    extrapolate(points)
}
