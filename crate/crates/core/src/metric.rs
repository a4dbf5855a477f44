//! ArtFID: content preservation times style matching.
//!
//! `ArtFID = (1 + mean content distance) · (1 + FID(style, generated))`. Each
//! factor is offset by one so a perfect score in one term does not zero out the
//! other. The bias-corrected variant swaps FID for the extrapolated FID∞ and
//! keeps the plain mean content distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fid_infinity::{fid_infinity_inner, ExtrapolationConfig, ExtrapolationTrace};
use crate::rng;
use crate::stats::{compute_stats, frechet_distance, mean_stddev, EmbeddingSet};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Per-pair distances `d(content_i, generated_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentDistanceVector {
    distances: Vec<f64>,
    backend_tag: String,
}

impl ContentDistanceVector {
    pub fn new(distances: Vec<f64>, backend_tag: impl Into<String>) -> Result<Self> {
        if distances.is_empty() {
            return Err(Error::EmptyInput("content distance vector".into()));
        }
        if let Some(i) = distances.iter().position(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "distance {i} must be finite and non-negative, got {}",
                distances[i]
            )));
        }
        Ok(Self {
            distances,
            backend_tag: backend_tag.into(),
        })
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn backend_tag(&self) -> &str {
        &self.backend_tag
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            indices.iter().map(|&i| self.distances[i]).collect(),
            self.backend_tag.clone(),
        )
    }
}

/// Distances from the bundled offline backend: mean absolute difference of
/// paired embedding rows.
pub fn toy_content_distances(content: &EmbeddingSet, generated: &EmbeddingSet) -> Result<ContentDistanceVector> {
    if content.n_rows() != generated.n_rows() {
        return Err(Error::LengthMismatch {
            left: content.n_rows(),
            right: generated.n_rows(),
        });
    }
    if content.n_cols() != generated.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: content.n_cols(),
            found: generated.n_cols(),
        });
    }
    let d = content.n_cols() as f64;
    let distances = content
        .rows()
        .zip(generated.rows())
        .map(|(c, g)| c.iter().zip(g).map(|(a, b)| (a - b).abs()).sum::<f64>() / d)
        .collect();
    ContentDistanceVector::new(distances, "toy")
}

pub fn mean_content_distance(distances: &ContentDistanceVector) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::EmptyInput("content distance vector".into()));
    }
    Ok(distances.distances.iter().sum::<f64>() / distances.len() as f64)
}

/// `(1 + mean distance) · (1 + fid)`.
pub fn combine(mean_content_distance: f64, fid: f64) -> f64 {
    (1.0 + mean_content_distance) * (1.0 + fid)
}

/// Fraction of rows whose predicted artist equals the target artist.
pub fn deception_rate<L: PartialEq>(predictions: &[(L, L)]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput("prediction list".into()));
    }
    let hits = predictions.iter().filter(|(p, t)| p == t).count();
    Ok(hits as f64 / predictions.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub seeds: Vec<u64>,
    pub n_style: usize,
    pub n_generated: usize,
    pub n_content_pairs: usize,
    pub style_tag: String,
    pub generated_tag: String,
    pub content_backend: String,
    pub extrapolation: Option<ExtrapolationConfig>,
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub fid: f64,
    pub fid_infinity: Option<f64>,
    pub mean_content_distance: f64,
    pub artfid: f64,
    pub artfid_infinity: Option<f64>,
    pub deception_rate: Option<f64>,
    pub extrapolation: Option<ExtrapolationTrace>,
    pub metadata: RunMetadata,
}

const CONSISTENCY_TOL: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONSISTENCY_TOL * a.abs().max(b.abs()).max(1.0)
}

impl MetricReport {
    /// Checks that the composite scores are recomputable from the report's own fields.
    pub fn check_consistency(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::NumericalFailure(format!("inconsistent report: {what}")));
        if !(self.fid >= 0.0 && self.mean_content_distance >= 0.0) {
            return bad("negative fid or content distance");
        }
        if !close(self.artfid, combine(self.mean_content_distance, self.fid)) {
            return bad("artfid != (1 + mean d)(1 + fid)");
        }
        if self.artfid < 1.0 {
            return bad("artfid < 1");
        }
        match (self.fid_infinity, self.artfid_infinity) {
            (Some(f), Some(a)) if !close(a, combine(self.mean_content_distance, f)) => {
                return bad("artfid_infinity != (1 + mean d)(1 + fid_infinity)");
            }
            (Some(_), None) | (None, Some(_)) => return bad("fid_infinity and artfid_infinity must be set together"),
            _ => {}
        }
        if let (Some(f), Some(t)) = (self.fid_infinity, &self.extrapolation) {
            if f != t.intercept {
                return bad("fid_infinity differs from the extrapolation intercept");
            }
        }
        if let Some(r) = self.deception_rate {
            if !(0.0..=1.0).contains(&r) {
                return bad("deception rate outside [0, 1]");
            }
        }
        Ok(())
    }

    pub fn with_deception_rate(mut self, rate: f64) -> Self {
        self.deception_rate = Some(rate);
        self
    }
}

/// ArtFID (and ArtFID∞ when `cfg` is given) for one evaluation run.
pub fn artfid(
    content_distances: &ContentDistanceVector,
    style: &EmbeddingSet,
    generated: &EmbeddingSet,
    cfg: Option<&ExtrapolationConfig>,
) -> Result<MetricReport> {
    if style.n_cols() != generated.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: style.n_cols(),
            found: generated.n_cols(),
        });
    }
    let mean_d = mean_content_distance(content_distances)?;
    let style_stats = compute_stats(style)?;
    let fid = frechet_distance(&style_stats, &compute_stats(generated)?)?;

    let extrapolation = cfg
        .map(|c| fid_infinity_inner(style, Some(&style_stats), generated, c))
        .transpose()?;
    let fid_infinity = extrapolation.as_ref().map(|t| t.intercept);

    let report = MetricReport {
        schema_version: REPORT_SCHEMA_VERSION,
        fid,
        fid_infinity,
        mean_content_distance: mean_d,
        artfid: combine(mean_d, fid),
        artfid_infinity: fid_infinity.map(|f| combine(mean_d, f)),
        deception_rate: None,
        extrapolation,
        metadata: RunMetadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: cfg.map(|c| vec![c.seed]).unwrap_or_default(),
            n_style: style.n_rows(),
            n_generated: generated.n_rows(),
            n_content_pairs: content_distances.len(),
            style_tag: style.source_tag().to_string(),
            generated_tag: generated.source_tag().to_string(),
            content_backend: content_distances.backend_tag().to_string(),
            extrapolation: cfg.copied(),
            config_hash: None,
        },
    };
    report.check_consistency()?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepeatOptions {
    pub runs: usize,
    pub seed: u64,
    /// Rows drawn (without replacement) per run; `None` uses every row.
    pub sample_size: Option<usize>,
    pub extrapolation: Option<ExtrapolationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedEvaluation {
    /// `"artfid_infinity"` when extrapolating, else `"artfid"`.
    pub statistic: String,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (`runs - 1` denominator).
    pub stddev: f64,
    pub reports: Vec<MetricReport>,
}

/// Runs [`artfid`] on `runs` independent samples.
///
/// Run `r` draws generated rows (and their paired distances) from stream
/// `(seed, r, 0)`, style rows from `(seed, r, 1)`, and uses
/// `derive_seed(seed, [r, 2])` as its extrapolation seed.
pub fn repeated_evaluation(
    content_distances: &ContentDistanceVector,
    style: &EmbeddingSet,
    generated: &EmbeddingSet,
    opts: &RepeatOptions,
) -> Result<RepeatedEvaluation> {
    if opts.runs < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            available: opts.runs,
        });
    }
    if opts.sample_size.is_some() && content_distances.len() != generated.n_rows() {
        return Err(Error::LengthMismatch {
            left: content_distances.len(),
            right: generated.n_rows(),
        });
    }
    if let Some(s) = opts.sample_size {
        let available = style.n_rows().min(generated.n_rows());
        if s > available {
            return Err(Error::InsufficientSamples { needed: s, available });
        }
    }

    let mut reports = Vec::with_capacity(opts.runs);
    for r in 0..opts.runs as u64 {
        let cfg = opts.extrapolation.map(|c| ExtrapolationConfig {
            seed: rng::derive_seed(opts.seed, &[r, 2]),
            ..c
        });
        let report = match opts.sample_size {
            Some(s) => {
                let gi = rng::sample_indices(&mut rng::stream(opts.seed, &[r, 0]), generated.n_rows(), s);
                let si = rng::sample_indices(&mut rng::stream(opts.seed, &[r, 1]), style.n_rows(), s);
                artfid(
                    &content_distances.select(&gi)?,
                    &style.select_rows(&si)?,
                    &generated.select_rows(&gi)?,
                    cfg.as_ref(),
                )?
            }
            None => artfid(content_distances, style, generated, cfg.as_ref())?,
        };
        reports.push(report);
    }

    let extrapolated = opts.extrapolation.is_some();
    let values: Vec<f64> = reports
        .iter()
        .map(|r| if extrapolated { r.artfid_infinity.unwrap_or(r.artfid) } else { r.artfid })
        .collect();
    let (mean, stddev) = mean_stddev(&values);
    Ok(RepeatedEvaluation {
        statistic: if extrapolated { "artfid_infinity" } else { "artfid" }.to_string(),
        values,
        mean,
        stddev,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StandardNormal};

    fn dv(v: &[f64]) -> ContentDistanceVector {
        ContentDistanceVector::new(v.to_vec(), "test").unwrap()
    }

    fn normal_set(n: usize, d: usize, shift: f64, seed: u64) -> EmbeddingSet {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * d)
            .map(|_| shift + Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        EmbeddingSet::new(n, d, data, "normal").unwrap()
    }

    #[test]
    fn mean_distance_examples() {
        assert_eq!(mean_content_distance(&dv(&[1.0, 2.0, 3.0])).unwrap(), 2.0);
        assert_eq!(mean_content_distance(&dv(&[0.0; 7])).unwrap(), 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let u: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        assert!((mean_content_distance(&dv(&u)).unwrap() - 0.5).abs() < 0.02);
    }

    #[test]
    fn distance_vector_validation() {
        assert!(matches!(ContentDistanceVector::new(vec![], "x"), Err(Error::EmptyInput(_))));
        assert!(ContentDistanceVector::new(vec![0.1, -0.2], "x").is_err());
        assert!(ContentDistanceVector::new(vec![f64::INFINITY], "x").is_err());
    }

    #[test]
    fn combine_examples() {
        assert_eq!(combine(0.0, 0.0), 1.0);
        assert_eq!(combine(0.5, 9.0), 15.0);
    }

    #[test]
    fn deception_examples() {
        assert_eq!(deception_rate(&[("a", "a"), ("b", "b")]).unwrap(), 1.0);
        assert_eq!(deception_rate(&[("a", "b"), ("b", "c")]).unwrap(), 0.0);
        assert_eq!(deception_rate(&[("a", "a"), ("b", "b"), ("c", "c"), ("d", "e")]).unwrap(), 0.75);
        assert!(matches!(deception_rate::<&str>(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn identical_sets_and_zero_distances_give_one() {
        let e = normal_set(50, 3, 0.0, 1);
        let r = artfid(&dv(&[0.0; 50]), &e, &e, None).unwrap();
        assert_eq!(r.fid, 0.0);
        assert_eq!(r.artfid, 1.0);
        assert!(r.fid_infinity.is_none());
    }

    #[test]
    fn infinity_fields_filled_with_config() {
        let s = normal_set(200, 3, 0.0, 1);
        let g = normal_set(200, 3, 0.5, 2);
        let cfg = ExtrapolationConfig {
            k_points: 5,
            min_subsample: 50,
            seed: 3,
            subsample_both: false,
        };
        let r = artfid(&dv(&[0.25; 200]), &s, &g, Some(&cfg)).unwrap();
        let f = r.fid_infinity.unwrap();
        assert_eq!(r.artfid_infinity.unwrap(), combine(0.25, f));
        assert_eq!(r.extrapolation.as_ref().unwrap().points.len(), 5);
        r.check_consistency().unwrap();
    }

    #[test]
    fn mismatched_dimensions() {
        let s = normal_set(20, 3, 0.0, 1);
        let g = normal_set(20, 2, 0.0, 2);
        assert!(matches!(
            artfid(&dv(&[0.1]), &s, &g, None),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn tampered_report_fails_consistency() {
        let e = normal_set(30, 2, 0.0, 1);
        let mut r = artfid(&dv(&[0.5]), &e, &normal_set(30, 2, 1.0, 4), None).unwrap();
        r.check_consistency().unwrap();
        r.artfid *= 1.0 + 1e-9;
        assert!(r.check_consistency().is_err());
    }

    #[test]
    fn toy_distances() {
        let c = EmbeddingSet::from_rows(&[[0.0, 0.0], [1.0, 1.0]], "c").unwrap();
        let g = EmbeddingSet::from_rows(&[[1.0, -1.0], [1.0, 2.0]], "g").unwrap();
        let d = toy_content_distances(&c, &g).unwrap();
        assert_eq!(d.distances(), &[1.0, 0.5]);
        assert_eq!(d.backend_tag(), "toy");
    }

    #[test]
    fn repeated_identical_runs_have_zero_spread() {
        let s = normal_set(40, 2, 0.0, 1);
        let g = normal_set(40, 2, 0.2, 2);
        let opts = RepeatOptions {
            runs: 3,
            seed: 1,
            sample_size: None,
            extrapolation: None,
        };
        let r = repeated_evaluation(&dv(&[0.3; 40]), &s, &g, &opts).unwrap();
        assert_eq!(r.stddev, 0.0);
        assert_eq!(r.values.len(), 3);
        assert_eq!(r.statistic, "artfid");
    }

    #[test]
    fn repeated_needs_two_runs() {
        let s = normal_set(40, 2, 0.0, 1);
        let opts = RepeatOptions {
            runs: 1,
            seed: 1,
            sample_size: None,
            extrapolation: None,
        };
        assert!(matches!(
            repeated_evaluation(&dv(&[0.3; 40]), &s, &s, &opts),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn repeated_half_samples_bracket_full_value() {
        // Resampling oracle: the full-set ArtFID∞ lies within two run-to-run
        // standard deviations of the mean over random half samples.
        let n = 4000;
        let s = normal_set(n, 3, 0.0, 11);
        let g = normal_set(n, 3, 0.4, 12);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let d: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 0.2).collect();
        let d = dv(&d);
        let cfg = ExtrapolationConfig {
            k_points: 8,
            min_subsample: 500,
            seed: 0,
            subsample_both: true,
        };
        let opts = RepeatOptions {
            runs: 5,
            seed: 21,
            sample_size: Some(n / 2),
            extrapolation: Some(cfg),
        };
        let rep = repeated_evaluation(&d, &s, &g, &opts).unwrap();
        let full = artfid(&d, &s, &g, Some(&cfg)).unwrap().artfid_infinity.unwrap();
        assert!(rep.stddev > 0.0);
        assert!((rep.mean - full).abs() < 2.0 * rep.stddev, "{} vs {} ± {}", rep.mean, full, rep.stddev);
    }
}
