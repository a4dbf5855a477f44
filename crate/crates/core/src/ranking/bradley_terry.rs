//! Bradley-Terry scores from pairwise preference counts.
//!
//! Model: `P(i beats j) = γ_i / (γ_i + γ_j)`, log-likelihood
//! `l(γ) = Σ_i Σ_j w_ij [log γ_i − log(γ_i + γ_j)]`. The fit uses the
//! minorize-maximize fixed point
//!
//! ```text
//! γ_i ← W_i / Σ_{j≠i} N_ij / (γ_i + γ_j),   W_i = Σ_j w_ij,   N_ij = w_ij + w_ji
//! ```
//!
//! applied to all entities simultaneously from `γ = (1, …, 1)`, followed by
//! renormalization to `Σ γ_i = 1`. Each step never decreases `l`.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `wins[i][j]` is how often entity `i` was preferred over entity `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    labels: Vec<String>,
    wins: Vec<Vec<u64>>,
}

impl ComparisonMatrix {
    /// Checks shape, label uniqueness and a zero diagonal. Connectivity is
    /// checked when fitting.
    pub fn new(labels: Vec<String>, wins: Vec<Vec<u64>>) -> Result<Self> {
        let m = labels.len();
        if m == 0 {
            return Err(Error::EmptyInput("comparison matrix".into()));
        }
        if wins.len() != m {
            return Err(Error::schema(None, None, format!("expected {m} rows, found {}", wins.len())));
        }
        for (i, row) in wins.iter().enumerate() {
            if row.len() != m {
                return Err(Error::schema(Some(i), None, format!("expected {m} cells, found {}", row.len())));
            }
            if row[i] != 0 {
                return Err(Error::schema(Some(i), Some(i), "diagonal entries must be zero"));
            }
        }
        let mut seen = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if let Some(j) = seen.insert(l.as_str(), i) {
                return Err(Error::schema(None, Some(i), format!("label '{l}' duplicates column {j}")));
            }
        }
        Ok(Self { labels, wins })
    }

    /// Tallies `(winner, loser)` outcomes into a matrix over `labels`.
    pub fn from_outcomes<'a>(
        labels: Vec<String>,
        outcomes: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let m = labels.len();
        let mut wins = vec![vec![0u64; m]; m];
        for (k, (w, l)) in outcomes.into_iter().enumerate() {
            let lookup = |name: &str| {
                index
                    .get(name)
                    .copied()
                    .ok_or_else(|| Error::schema(Some(k), None, format!("unknown entity '{name}'")))
            };
            let (wi, li) = (lookup(w)?, lookup(l)?);
            if wi == li {
                return Err(Error::schema(Some(k), None, "an entity cannot be compared with itself"));
            }
            wins[wi][li] += 1;
        }
        Self::new(labels, wins)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn wins(&self, i: usize, j: usize) -> u64 {
        self.wins[i][j]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.wins
    }

    /// `W_i`, total wins of entity `i`.
    pub fn total_wins(&self, i: usize) -> u64 {
        self.wins[i].iter().sum()
    }

    /// `N_ij = w_ij + w_ji`.
    pub fn pairings(&self, i: usize, j: usize) -> u64 {
        self.wins[i][j] + self.wins[j][i]
    }

    /// Whether the undirected graph with an edge wherever `N_ij > 0` is connected.
    pub fn is_connected(&self) -> bool {
        self.reachable_count(|i, j| self.pairings(i, j) > 0) == self.len()
    }

    /// Whether every entity can reach every other through "beat" edges `i → j` (`w_ij > 0`).
    pub fn is_strongly_connected(&self) -> bool {
        self.reachable_count(|i, j| self.wins[i][j] > 0) == self.len()
            && self.reachable_count(|i, j| self.wins[j][i] > 0) == self.len()
    }

    fn reachable_count(&self, edge: impl Fn(usize, usize) -> bool) -> usize {
        let m = self.len();
        let mut seen = vec![false; m];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for (j, s) in seen.iter_mut().enumerate() {
                if !*s && edge(i, j) {
                    *s = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Stop once `max_i |γ_i(k+1) − γ_i(k)|` falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub labels: Vec<String>,
    /// Positive scores summing to one.
    pub gamma: Vec<f64>,
    pub iterations: usize,
    pub final_delta: f64,
    pub log_likelihood: f64,
    pub tol: f64,
    pub max_iter: usize,
}

/// Bradley-Terry log-likelihood of `gamma` under `w`.
pub fn log_likelihood(gamma: &[f64], w: &ComparisonMatrix) -> Result<f64> {
    if gamma.len() != w.len() {
        return Err(Error::LengthMismatch {
            left: gamma.len(),
            right: w.len(),
        });
    }
    if let Some(index) = gamma.iter().position(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(Error::NonPositiveGamma {
            index,
            value: gamma[index],
        });
    }
    let mut total = 0.0;
    for (i, row) in w.rows().iter().enumerate() {
        for (j, &wij) in row.iter().enumerate() {
            if wij > 0 {
                let wij = wij as f64;
                total += wij * gamma[i].ln() - wij * (gamma[i] + gamma[j]).ln();
            }
        }
    }
    Ok(total)
}

/// One simultaneous MM update followed by renormalization.
pub fn mm_step(w: &ComparisonMatrix, gamma: &[f64]) -> Vec<f64> {
    let m = w.len();
    let mut next: Vec<f64> = (0..m)
        .map(|i| {
            let denom: f64 = (0..m)
                .filter(|&j| j != i)
                .map(|j| w.pairings(i, j) as f64 / (gamma[i] + gamma[j]))
                .sum();
            w.total_wins(i) as f64 / denom
        })
        .collect();
    let total: f64 = next.iter().sum();
    next.iter_mut().for_each(|g| *g /= total);
    next
}

fn check_fit_preconditions(w: &ComparisonMatrix) -> Result<()> {
    if !w.is_connected() {
        return Err(Error::NotConnected(
            "some subset of entities is never compared with the rest".into(),
        ));
    }
    if let Some(i) = (0..w.len()).find(|&i| w.total_wins(i) == 0) {
        return Err(Error::WinlessEntity {
            label: w.labels()[i].clone(),
        });
    }
    if !w.is_strongly_connected() {
        return Err(Error::NotConnected(
            "some subset of entities never beats the rest; the maximum-likelihood scores do not exist".into(),
        ));
    }
    Ok(())
}

/// Fits scores starting from the all-ones vector.
pub fn bradley_terry_fit(w: &ComparisonMatrix, opts: &FitOptions) -> Result<ScoreVector> {
    bradley_terry_fit_from(w, &vec![1.0; w.len()], opts)
}

/// Fits scores from an arbitrary positive starting vector.
pub fn bradley_terry_fit_from(w: &ComparisonMatrix, initial: &[f64], opts: &FitOptions) -> Result<ScoreVector> {
    if opts.tol.is_nan() || opts.tol <= 0.0 || opts.max_iter == 0 {
        return Err(Error::InvalidArgument("tol must be positive and max_iter at least 1".into()));
    }
    check_fit_preconditions(w)?;
    let mut gamma = initial.to_vec();
    // Validates positivity and length of the starting point as a side effect.
    let mut ll = log_likelihood(&gamma, w)?;

    let mut delta = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let next = mm_step(w, &gamma);
        delta = next
            .iter()
            .zip(&gamma)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if cfg!(debug_assertions) {
            let next_ll = log_likelihood(&next, w)?;
            debug_assert!(
                next_ll >= ll - 1e-9 * ll.abs().max(1.0),
                "MM step decreased the log-likelihood: {ll} -> {next_ll}"
            );
            ll = next_ll;
        }
        gamma = next;
        if delta < opts.tol {
            return Ok(ScoreVector {
                labels: w.labels().to_vec(),
                log_likelihood: log_likelihood(&gamma, w)?,
                gamma,
                iterations: iter,
                final_delta: delta,
                tol: opts.tol,
                max_iter: opts.max_iter,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        last_delta: delta,
    })
}
