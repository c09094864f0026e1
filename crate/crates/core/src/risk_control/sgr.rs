//! Selection with guaranteed risk.
//!
//! Bisects over coverage levels of the sorted validation scores. At each
//! probed threshold the empirical selective risk is turned into a
//! high-probability upper bound by inverting the binomial tail; the budget
//! δ is split evenly over the ⌈log₂ N⌉ probes.

use serde::{Deserialize, Serialize};

use crate::error::{FdError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgrResult {
    /// Samples with score ≥ threshold are accepted.
    pub threshold: f64,
    /// Upper bound on the selective risk holding with probability ≥ 1 − δ.
    pub risk_bound: f64,
    pub empirical_coverage: f64,
    pub empirical_risk: f64,
    pub delta: f64,
    pub r_star: f64,
}

/// ln P[X ≤ k] for X ~ Binomial(m, p).
pub fn binomial_log_cdf(k: usize, m: usize, p: f64) -> f64 {
    if k >= m || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut ln_choose = 0.0;
    let mut terms = Vec::with_capacity(k + 1);
    for j in 0..=k {
        if j > 0 {
            ln_choose += ((m - j + 1) as f64).ln() - (j as f64).ln();
        }
        terms.push(ln_choose + j as f64 * lp + (m - j) as f64 * lq);
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Smallest p with P[Binomial(m, p) ≤ errors] ≤ delta, found by bisection.
pub fn binomial_upper_bound(errors: usize, m: usize, delta: f64) -> f64 {
    if errors >= m {
        return 1.0;
    }
    let log_delta = delta.ln();
    let (mut lo, mut hi) = (errors as f64 / m as f64, 1.0);
    for _ in 0..200 {
        if hi - lo <= 1e-14 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if binomial_log_cdf(errors, m, mid) <= log_delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn validate(scores: &[f64], residuals: &[u8], r_star: f64, delta: f64) -> Result<()> {
    if !(r_star > 0.0 && r_star < 1.0) {
        return Err(FdError::InvalidParameter(format!("r_star must lie in (0, 1), got {r_star}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(FdError::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if scores.len() != residuals.len() {
        return Err(FdError::InvalidParameter(format!(
            "{} scores but {} residuals",
            scores.len(),
            residuals.len()
        )));
    }
    if scores.len() < 10 {
        return Err(FdError::InvalidParameter(format!(
            "selection needs at least 10 samples, got {}",
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(FdError::InvalidParameter("scores must be finite".into()));
    }
    Ok(())
}

pub fn sgr_select(scores: &[f64], residuals: &[u8], r_star: f64, delta: f64) -> Result<SgrResult> {
    validate(scores, residuals, r_star, delta)?;
    let m = scores.len();
    let mut sorted: Vec<(f64, u8)> = scores.iter().copied().zip(residuals.iter().copied()).collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));

    // Errors among sorted[i..].
    let mut tail_errors = vec![0usize; m + 1];
    for i in (0..m).rev() {
        tail_errors[i] = tail_errors[i + 1] + sorted[i].1 as usize;
    }
    // First index of each tie group, so a threshold keeps all of its ties.
    let mut group_start = vec![0usize; m];
    for i in 1..m {
        group_start[i] = if sorted[i].0 == sorted[i - 1].0 { group_start[i - 1] } else { i };
    }

    let probes = (m as f64).log2().ceil() as usize;
    let delta_probe = delta / probes as f64;
    let (mut lo, mut hi) = (0usize, m - 1);
    let mut best = None;
    let mut used = 0;
    while lo < hi {
        used += 1;
        debug_assert!(used <= probes);
        let mid = (lo + hi) / 2;
        let start = group_start[mid];
        let selected = m - start;
        let errors = tail_errors[start];
        let bound = binomial_upper_bound(errors, selected, delta_probe);
        if bound <= r_star {
            best = Some(SgrResult {
                threshold: sorted[mid].0,
                risk_bound: bound,
                empirical_coverage: selected as f64 / m as f64,
                empirical_risk: errors as f64 / selected as f64,
                delta,
                r_star,
            });
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    best.ok_or(FdError::NoFeasibleThreshold)
}

/// Selective risk of `threshold` on a held-out set: errors / accepted,
/// or `None` when nothing is accepted.
pub fn selective_risk(scores: &[f64], residuals: &[u8], threshold: f64) -> Option<f64> {
    let (accepted, errors) = scores
        .iter()
        .zip(residuals)
        .filter(|(&s, _)| s >= threshold)
        .fold((0usize, 0usize), |(a, e), (_, &r)| (a + 1, e + r as usize));
    (accepted > 0).then(|| errors as f64 / accepted as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_cdf_matches_direct_sum() {
        // P[X ≤ 2], X ~ Bin(10, 0.3) = 0.3827827864
        let direct: f64 = (0..=2)
            .map(|j| {
                let c = [1.0, 10.0, 45.0][j];
                c * 0.3f64.powi(j as i32) * 0.7f64.powi(10 - j as i32)
            })
            .sum();
        assert!((binomial_log_cdf(2, 10, 0.3).exp() - direct).abs() < 1e-14);
    }

    #[test]
    fn zero_error_bound_has_closed_form() {
        for (m, d) in [(1000usize, 0.001f64), (50, 0.05), (10, 0.2)] {
            let expected = 1.0 - d.powf(1.0 / m as f64);
            assert!((binomial_upper_bound(0, m, d) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn all_correct_keeps_full_coverage() {
        let scores: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let res = sgr_select(&scores, &vec![0; 1000], 0.05, 0.01).unwrap();
        assert_eq!(res.empirical_coverage, 1.0);
        let probes = 10.0;
        assert!((res.risk_bound - (1.0 - (0.01f64 / probes).powf(1.0 / 1000.0))).abs() < 1e-12);
        assert!(res.risk_bound <= 0.05);
    }

    #[test]
    fn all_wrong_is_infeasible() {
        let scores: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert!(matches!(sgr_select(&scores, &[1; 50], 0.5, 0.1), Err(FdError::NoFeasibleThreshold)));
    }

    #[test]
    fn rejects_bad_parameters() {
        let s = vec![0.0; 20];
        let r = vec![0; 20];
        assert!(sgr_select(&s, &r, 0.0, 0.1).is_err());
        assert!(sgr_select(&s, &r, 0.1, 1.0).is_err());
        assert!(sgr_select(&s[..5], &r[..5], 0.1, 0.1).is_err());
    }

    #[test]
    fn ties_select_whole_group() {
        let scores = vec![0.5; 20];
        let res = sgr_select(&scores, &[0; 20], 0.5, 0.1).unwrap();
        assert_eq!(res.empirical_coverage, 1.0);
    }

    #[test]
    fn selective_risk_on_holdout() {
        assert_eq!(selective_risk(&[0.1, 0.5, 0.9], &[1, 1, 0], 0.5), Some(0.5));
        assert_eq!(selective_risk(&[0.1], &[1], 0.5), None);
    }
}
