//! Spearman rank correlation with significance tests.

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Largest sample size accepted by [`PValueMethod::ExactPermutation`].
pub const MAX_EXACT_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    /// `t = ρ √((n − 2) / (1 − ρ²))` against Student's t with `n − 2` degrees of freedom.
    #[default]
    TApproximation,
    /// Enumerates all `n!` rank permutations.
    ExactPermutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub rho: f64,
    /// Alternative: any correlation.
    pub p_two_sided: f64,
    /// Alternative: positive correlation.
    pub p_one_sided: f64,
    pub n: usize,
    pub tie_policy: String,
    pub method: PValueMethod,
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1 ..= end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn t_approximation(rho: f64, n: usize) -> Result<(f64, f64)> {
    if rho.abs() == 1.0 {
        // The t statistic is infinite. Only the identity (or reversal) of the
        // n! equally likely rank orders reaches |ρ| = 1 under the null.
        let p = 1.0 / factorial(n);
        return Ok(if rho > 0.0 { (2.0 * p, p) } else { (2.0 * p, 1.0) });
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::NumericalFailure(e.to_string()))?;
    let upper = dist.sf(t);
    let lower = dist.cdf(t);
    let two = (2.0 * upper.min(lower)).min(1.0);
    Ok((two, upper))
}

fn exact_permutation(rx: &[f64], ry: &[f64], rho: f64) -> Result<(f64, f64)> {
    let n = rx.len();
    if n > MAX_EXACT_N {
        return Err(Error::InvalidArgument(format!(
            "exact permutation p-values are limited to n <= {MAX_EXACT_N}, got {n}"
        )));
    }
    // Slack for float noise in Pearson on permuted ranks.
    let eps = 1e-12;
    let (mut upper, mut both, mut total) = (0u64, 0u64, 0u64);
    for perm in (0..n).permutations(n) {
        let permuted: Vec<f64> = perm.iter().map(|&i| ry[i]).collect();
        let r = pearson(rx, &permuted).unwrap_or(0.0);
        total += 1;
        if r >= rho - eps {
            upper += 1;
        }
        if r.abs() >= rho.abs() - eps {
            both += 1;
        }
    }
    Ok((both as f64 / total as f64, upper as f64 / total as f64))
}

/// Spearman's ρ between `x` and `y` using the t-approximation for p-values.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<CorrelationReport> {
    spearman_rho_with(x, y, PValueMethod::TApproximation)
}

pub fn spearman_rho_with(x: &[f64], y: &[f64], method: PValueMethod) -> Result<CorrelationReport> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientSamples { needed: 3, available: n });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("correlation inputs must be finite".into()));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let rho = pearson(&rx, &ry).ok_or(Error::ConstantInput)?;
    let (p_two_sided, p_one_sided) = match method {
        PValueMethod::TApproximation => t_approximation(rho, n)?,
        PValueMethod::ExactPermutation => exact_permutation(&rx, &ry, rho)?,
    };
    Ok(CorrelationReport {
        rho,
        p_two_sided,
        p_one_sided,
        n,
        tie_policy: "average".to_string(),
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 30.0, 20.0]), vec![1.0, 3.0, 2.0]);
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 3.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn identical_and_reversed() {
        let x = [0.3, 1.0, -2.0, 4.5, 9.0];
        let r = spearman_rho(&x, &x).unwrap();
        assert_eq!(r.rho, 1.0);
        assert!(r.p_one_sided > 0.0 && r.p_two_sided <= 1.0);

        let mut sorted = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        let reversed: Vec<f64> = sorted.iter().rev().copied().collect();
        assert_eq!(spearman_rho(&sorted, &reversed).unwrap().rho, -1.0);
    }

    #[test]
    fn tie_free_matches_difference_formula() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let y = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0, 6.0];
        let n = 7.0;
        let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        let expected = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
        assert!((spearman_rho(&x, &y).unwrap().rho - expected).abs() < 1e-14);
    }

    #[test]
    fn errors() {
        assert!(matches!(spearman_rho(&[1.0, 2.0, 3.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::ConstantInput)));
        assert!(matches!(spearman_rho(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::InsufficientSamples { .. })));
        let big: Vec<f64> = (0..9).map(f64::from).collect();
        assert!(spearman_rho_with(&big, &big, PValueMethod::ExactPermutation).is_err());
    }

    #[test]
    fn exact_permutation_small_cases() {
        // n = 4: of the 24 orderings, one has ρ = 1 and three have ρ = 0.8.
        let x = [1.0, 2.0, 3.0, 4.0];
        let r = spearman_rho_with(&x, &x, PValueMethod::ExactPermutation).unwrap();
        assert!((r.p_one_sided - 1.0 / 24.0).abs() < 1e-15);
        assert!((r.p_two_sided - 2.0 / 24.0).abs() < 1e-15);
        let r = spearman_rho_with(&x, &[1.0, 2.0, 4.0, 3.0], PValueMethod::ExactPermutation).unwrap();
        assert!((r.rho - 0.8).abs() < 1e-15);
        assert!((r.p_one_sided - 4.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn t_approximation_matches_scipy_reference() {
        // scipy.stats.spearmanr([1..8], [2,1,4,3,6,5,8,7]) -> (0.9047619..., 0.0020009...)
        let x: Vec<f64> = (1..=8).map(f64::from).collect();
        let y = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 8.0, 7.0];
        let r = spearman_rho(&x, &y).unwrap();
        assert!((r.rho - 0.9047619047619048).abs() < 1e-14);
        assert!((r.p_two_sided / 0.0020082755054294677 - 1.0).abs() < 1e-6, "{}", r.p_two_sided);
    }

    proptest! {
        #[test]
        fn invariant_under_monotone_transforms(
            pairs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..40)
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            prop_assume!(x.iter().any(|v| *v != x[0]) && y.iter().any(|v| *v != y[0]));
            let base = spearman_rho(&x, &y).unwrap();
            let tx: Vec<f64> = x.iter().map(|v| (v / 10.0).exp() + 3.0).collect();
            let ty: Vec<f64> = y.iter().map(|v| v * v * v).collect();
            let moved = spearman_rho(&tx, &ty).unwrap();
            prop_assert!((base.rho - moved.rho).abs() < 1e-12);
            prop_assert!(base.p_two_sided > 0.0 && base.p_two_sided <= 1.0);
            if base.rho > 0.0 {
                prop_assert!((base.p_two_sided - 2.0 * base.p_one_sided).abs() <= 1e-9 * base.p_two_sided);
            }
        }
    }
}
