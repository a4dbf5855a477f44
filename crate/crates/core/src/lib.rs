//! Evaluation toolkit for artistic style transfer: Gaussian embedding
//! statistics, FID and its extrapolated variant, ArtFID, pairwise-preference
//! ranking, rank correlation and controlled image perturbations.

pub mod cli;
pub mod error;
pub mod fid_infinity;
pub mod formats;
pub mod metric;
pub mod perturb;
pub mod ranking;
pub mod rng;
pub mod stats;

pub use error::{Error, ErrorCategory, Result};
pub use fid_infinity::{fid_infinity, ExtrapolationConfig, ExtrapolationTrace};
pub use metric::{artfid, combine, deception_rate, ContentDistanceVector, MetricReport};
pub use stats::{compute_stats, fid, frechet_distance, sqrtm_psd, EmbeddingSet, GaussianStats};
