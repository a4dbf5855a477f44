//! Human-preference ranking and its agreement with metric rankings.

pub mod bradley_terry;
pub mod correlation;

use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bradley_terry::{
    bradley_terry_fit, bradley_terry_fit_from, log_likelihood, mm_step, ComparisonMatrix, FitOptions, ScoreVector,
};
pub use correlation::{average_ranks, spearman_rho, spearman_rho_with, CorrelationReport, PValueMethod};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    HigherBetter,
    LowerBetter,
}

impl Direction {
    /// Maps a score so that larger always means better.
    pub fn orient(self, value: f64) -> f64 {
        match self {
            Direction::HigherBetter => value,
            Direction::LowerBetter => -value,
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "higher-better" | "higher_better" | "higher" => Ok(Direction::HigherBetter),
            "lower-better" | "lower_better" | "lower" => Ok(Direction::LowerBetter),
            other => Err(Error::InvalidArgument(format!(
                "unknown direction '{other}' (expected higher-better or lower-better)"
            ))),
        }
    }
}

/// Labels from best to worst. Equal scores are ordered by label.
pub fn rank_methods(scores: &[(String, f64)], direction: Direction) -> Vec<String> {
    let mut sorted: Vec<&(String, f64)> = scores.iter().collect();
    sorted.sort_by(|a, b| {
        direction
            .orient(b.1)
            .total_cmp(&direction.orient(a.1))
            .then_with(|| a.0.cmp(&b.0))
    });
    sorted.into_iter().map(|(l, _)| l.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(v: &[(&str, f64)]) -> Vec<(String, f64)> {
        v.iter().map(|(l, s)| (l.to_string(), *s)).collect()
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(rank_methods(&scores(&[("a", 2.0), ("b", 1.0)]), Direction::HigherBetter), ["a", "b"]);
        assert_eq!(rank_methods(&scores(&[("a", 2.0), ("b", 1.0)]), Direction::LowerBetter), ["b", "a"]);
        assert_eq!(rank_methods(&scores(&[("solo", 3.0)]), Direction::HigherBetter), ["solo"]);
        assert_eq!(
            rank_methods(&scores(&[("c", 1.0), ("a", 1.0), ("b", 1.0)]), Direction::LowerBetter),
            ["a", "b", "c"]
        );
    }

    #[test]
    fn direction_parsing() {
        assert_eq!("lower-better".parse::<Direction>().unwrap(), Direction::LowerBetter);
        assert!("sideways".parse::<Direction>().is_err());
    }
}
