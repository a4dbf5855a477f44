//! Seeded random streams.
//!
//! Every random draw in the crate goes through [`stream`], which maps a root
//! seed plus a path of indices (trial, subsample size index, image index, ...)
//! to an independent ChaCha8 generator. Streams depend only on that path, so
//! work can be split across threads without changing results.
//!
//! Seed derivation: `s = seed`, then for each index `s = splitmix64(s ^ splitmix64(index))`;
//! the generator is `ChaCha8Rng::seed_from_u64(s)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// One SplitMix64 output step for state `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(seed, |s, &idx| splitmix64(s ^ splitmix64(idx)))
}

pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// Uniform integer in `0..bound` (Lemire's multiply-and-reject).
pub fn below(rng: &mut impl RngCore, bound: u64) -> u64 {
    assert!(bound > 0, "bound must be positive");
    let threshold = bound.wrapping_neg() % bound;
    loop {
        let m = (rng.next_u64() as u128) * (bound as u128);
        if (m as u64) >= threshold {
            return (m >> 64) as u64;
        }
    }
}

/// First `k` entries of a Fisher-Yates shuffle of `0..n`: a uniformly random
/// `k`-subset, without replacement, in draw order.
pub fn sample_indices(rng: &mut impl RngCore, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n, "cannot draw {k} of {n} without replacement");
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + below(rng, (n - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}
