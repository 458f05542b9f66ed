//! Seeded inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Skewed sample of `n` values in roughly `[-1, 1]`.
pub fn values(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| (r.random::<f64>() - 0.3).powi(3) * 2.0).collect()
}

/// Predicted losses for `n` actions and the index of their minimum.
pub fn predictions(n: usize, seed: u64) -> (Vec<f64>, usize) {
    let mut r = rng(seed);
    let f: Vec<f64> = (0..n).map(|_| r.random()).collect();
    let best = (0..n).min_by(|&i, &j| f[i].total_cmp(&f[j])).unwrap_or(0);
    (f, best)
}
