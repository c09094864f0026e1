//! Synthetic bundles for demos and statistical tests.

use fdshift_core::{argmax, FdError, PredictionBundle, ShiftTag};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed taken from `FDSHIFT_SEED`, 0 when unset.
pub fn env_seed() -> Result<u64, String> {
    match std::env::var("FDSHIFT_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| format!("FDSHIFT_SEED must be an unsigned integer, got `{v}`")),
        Err(_) => Ok(0),
    }
}

/// I.i.d. bundle with a perfectly calibrated max-softmax score: each sample
/// is correct with probability equal to its max softmax probability.
///
/// The top logit leads the others by a gap drawn uniformly from [0, 6];
/// the remaining logits get uniform noise in [-0.5, 0.5].
pub fn calibrated_bundle(n: usize, c: usize, seed: u64) -> Result<PredictionBundle, FdError> {
    if n == 0 || c < 2 {
        return Err(FdError::InvalidParameter(format!("need n ≥ 1 and c ≥ 2, got n = {n}, c = {c}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut logits = Array2::<f64>::zeros((n, c));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let top = rng.random_range(0..c);
        let gap = rng.random_range(0.0..6.0);
        for j in 0..c {
            logits[[i, j]] = if j == top { gap + 0.5 } else { rng.random_range(-0.5..0.5) };
        }
        let row = logits.row(i);
        let max = row[top];
        let msr = 1.0 / row.iter().map(|&v| (v - max).exp()).sum::<f64>();
        let pred = argmax(row);
        let label = if rng.random::<f64>() < msr {
            pred
        } else {
            (pred + rng.random_range(1..c)) % c
        };
        labels.push(label);
    }
    PredictionBundle::new(logits, labels, vec![ShiftTag::Iid; n])
}
