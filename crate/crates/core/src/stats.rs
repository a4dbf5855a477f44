//! Gaussian summaries of embedding sets and the Fréchet distance between them.
//!
//! Summation policy: rows are first put into a canonical order (lexicographic
//! on their values, compared with `f64::total_cmp`), then reduced with a
//! pairwise tree whose split points depend only on the row count. The result
//! is therefore bit-identical under any row permutation and any rayon thread
//! count.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on `|a_ij - a_ji|` accepted as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Eigenvalues above `-PSD_TOL * max|λ|` are clamped to zero; anything lower is an error.
pub const PSD_TOL: f64 = 1e-8;
/// Negative Fréchet distances within this (scaled) margin are round-off and clamp to zero.
pub const NEGATIVE_DISTANCE_TOL: f64 = 1e-6;

const LEAF_ROWS: usize = 128;

/// `N × D` matrix of finite feature vectors, one row per image.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
    source_tag: String,
}

impl EmbeddingSet {
    /// Builds a set from row-major `data`.
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>, source_tag: impl Into<String>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::DegenerateInput(format!(
                "embedding set must be non-empty, got {n_rows}x{n_cols}"
            )));
        }
        let expected = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| Error::InvalidArgument("embedding dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: expected,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                row: pos / n_cols,
                col: pos % n_cols,
            });
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
            source_tag: source_tag.into(),
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], source_tag: impl Into<String>) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), n_cols, data, source_tag)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.n_cols)
    }

    /// New set made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            if i >= self.n_rows {
                return Err(Error::InvalidArgument(format!(
                    "row index {i} out of range for {} rows",
                    self.n_rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.n_cols, data, self.source_tag.clone())
    }
}

/// Mean vector and covariance matrix of an embedding set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    n_samples: usize,
}

impl GaussianStats {
    /// Validates user-supplied moments. `sigma` is symmetrized and checked for
    /// positive semidefiniteness up to round-off.
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>, n_samples: usize) -> Result<Self> {
        if n_samples < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                available: n_samples,
            });
        }
        if mu.is_empty() {
            return Err(Error::DegenerateInput("mean vector is empty".into()));
        }
        if sigma.nrows() != mu.len() || sigma.ncols() != mu.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len(),
                found: if sigma.nrows() != mu.len() { sigma.nrows() } else { sigma.ncols() },
            });
        }
        if mu.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite moment".into()));
        }
        let sigma = checked_symmetric(&sigma)?;
        psd_eigen(&sigma)?;
        Ok(Self { mu, sigma, n_samples })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }
}

/// Serializable view of [`GaussianStats`]; `sigma` is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsDocument {
    pub n_samples: usize,
    pub dim: usize,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

impl From<&GaussianStats> for StatsDocument {
    fn from(s: &GaussianStats) -> Self {
        StatsDocument {
            n_samples: s.n_samples,
            dim: s.dim(),
            mu: s.mu.iter().copied().collect(),
            sigma: s.sigma.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }
}

impl TryFrom<&StatsDocument> for GaussianStats {
    type Error = Error;

    fn try_from(doc: &StatsDocument) -> Result<Self> {
        let d = doc.mu.len();
        if doc.sigma.len() != d || doc.sigma.iter().any(|r| r.len() != d) {
            return Err(Error::schema(None, None, "sigma must be a dim x dim matrix"));
        }
        let sigma = DMatrix::from_fn(d, d, |i, j| doc.sigma[i][j]);
        GaussianStats::new(DVector::from_vec(doc.mu.clone()), sigma, doc.n_samples)
    }
}

fn compare_rows(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Pairwise reduction over `order`; `leaf` sums a short run of rows.
fn tree_reduce<F>(order: &[usize], leaf: &F) -> Vec<f64>
where
    F: Fn(&[usize]) -> Vec<f64> + Sync,
{
    if order.len() <= LEAF_ROWS {
        return leaf(order);
    }
    let mid = order.len() / 2;
    let (mut left, right) = rayon::join(|| tree_reduce(&order[..mid], leaf), || tree_reduce(&order[mid..], leaf));
    for (l, r) in left.iter_mut().zip(&right) {
        *l += r;
    }
    left
}

/// Column means and unbiased (`N - 1`) sample covariance.
pub fn compute_stats(embeddings: &EmbeddingSet) -> Result<GaussianStats> {
    let n = embeddings.n_rows();
    let d = embeddings.n_cols();
    if n < 2 {
        return Err(Error::DegenerateInput(format!(
            "sample covariance needs at least 2 rows, got {n}"
        )));
    }
    if embeddings.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("embedding set contains non-finite values".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| compare_rows(embeddings.row(a), embeddings.row(b)));

    let sums = tree_reduce(&order, &|rows: &[usize]| {
        let mut acc = vec![0.0; d];
        for &r in rows {
            for (a, v) in acc.iter_mut().zip(embeddings.row(r)) {
                *a += v;
            }
        }
        acc
    });
    let mu: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();

    let scatter = tree_reduce(&order, &|rows: &[usize]| {
        let block = DMatrix::from_fn(rows.len(), d, |i, j| embeddings.row(rows[i])[j] - mu[j]);
        let s = block.tr_mul(&block);
        s.as_slice().to_vec()
    });
    let s = DMatrix::from_vec(d, d, scatter) / (n as f64 - 1.0);
    let sigma = (&s + s.transpose()) * 0.5;

    Ok(GaussianStats {
        mu: DVector::from_vec(mu),
        sigma,
        n_samples: n,
    })
}

/// Checks symmetry to [`SYMMETRY_TOL`] relative to the largest entry and returns `(A + Aᵀ)/2`.
fn checked_symmetric(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("matrix has non-finite entries".into()));
    }
    let scale = a.amax();
    let asymmetry = (a - a.transpose()).amax();
    if asymmetry > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric { asymmetry, scale });
    }
    Ok((a + a.transpose()) * 0.5)
}

/// Symmetric eigendecomposition with small negative eigenvalues clamped to zero.
fn psd_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let mut eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigendecomposition did not converge".into()))?;
    let max_abs = eig.eigenvalues.amax();
    for lambda in eig.eigenvalues.iter_mut() {
        if *lambda < 0.0 {
            if *lambda < -PSD_TOL * max_abs {
                return Err(Error::NotPsd {
                    eigenvalue: *lambda,
                    max_abs,
                });
            }
            *lambda = 0.0;
        }
    }
    Ok(eig)
}

/// Principal square root of a symmetric positive semidefinite matrix,
/// `V diag(√λ) Vᵀ`.
pub fn sqrtm_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = checked_symmetric(a)?;
    let eig = psd_eigen(&sym)?;
    let roots = eig.eigenvalues.map(f64::sqrt);
    let v = &eig.eigenvectors;
    let r = v * DMatrix::from_diagonal(&roots) * v.transpose();
    Ok((&r + r.transpose()) * 0.5)
}

/// `Tr((A B)^{1/2})` for PSD `A`, `B`, computed as `Tr((A^{1/2} B A^{1/2})^{1/2})`.
fn trace_sqrt_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let root = sqrtm_psd(a)?;
    let inner = &root * b * &root;
    let inner = (&inner + inner.transpose()) * 0.5;
    let eig = psd_eigen(&inner)?;
    Ok(eig.eigenvalues.iter().map(|l| l.sqrt()).sum())
}

/// `‖μ_s − μ_g‖² + Tr(Σ_s + Σ_g − 2 (Σ_s Σ_g)^{1/2})`.
///
/// Negative results no lower than `-1e-6 · max(1, Tr Σ_s + Tr Σ_g)` are
/// treated as round-off and returned as zero.
pub fn frechet_distance(s: &GaussianStats, g: &GaussianStats) -> Result<f64> {
    if s.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: g.dim(),
        });
    }
    if s.mu == g.mu && s.sigma == g.sigma {
        return Ok(0.0);
    }
    let mean_term = (&s.mu - &g.mu).norm_squared();
    let trace_sum = s.sigma.trace() + g.sigma.trace();
    let cross = trace_sqrt_product(&s.sigma, &g.sigma)?;
    let value = mean_term + trace_sum - 2.0 * cross;
    if !value.is_finite() {
        return Err(Error::NumericalFailure("Fréchet distance is not finite".into()));
    }
    if value < 0.0 {
        if value < -NEGATIVE_DISTANCE_TOL * trace_sum.max(1.0) {
            return Err(Error::NumericalFailure(format!(
                "trace term is materially negative ({value:e})"
            )));
        }
        return Ok(0.0);
    }
    Ok(value)
}

/// Sample mean and unbiased standard deviation. Constant samples give a
/// spread of exactly zero; a single value gives zero spread.
pub fn mean_stddev(values: &[f64]) -> (f64, f64) {
    match values {
        [] => (f64::NAN, 0.0),
        [first, rest @ ..] if rest.iter().all(|v| v == first) => (*first, 0.0),
        _ => {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, var.sqrt())
        }
    }
}

/// FID between two embedding sets.
pub fn fid(style: &EmbeddingSet, generated: &EmbeddingSet) -> Result<f64> {
    if style.n_cols() != generated.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: style.n_cols(),
            found: generated.n_cols(),
        });
    }
    frechet_distance(&compute_stats(style)?, &compute_stats(generated)?)
}
