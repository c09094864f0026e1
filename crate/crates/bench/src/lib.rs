//! Seeded inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` scores in [0, 1) with roughly `tie_density` of them copied from
/// earlier samples, and failures drawn at `failure_rate`.
pub fn scores_and_residuals(n: usize, tie_density: f64, failure_rate: f64, seed: u64) -> (Vec<f64>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let s = if i > 0 && rng.random::<f64>() < tie_density {
            scores[rng.random_range(0..i)]
        } else {
            rng.random()
        };
        scores.push(s);
    }
    let residuals = (0..n).map(|_| (rng.random::<f64>() < failure_rate) as u8).collect();
    (scores, residuals)
}

/// `rows` logit rows of width `c` drawn from [-10, 10).
pub fn logit_rows(rows: usize, c: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows)
        .map(|_| (0..c).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect()
}
