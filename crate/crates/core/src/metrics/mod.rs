//! Failure-detection metrics.
//!
//! All ranking metrics take raw scores (higher = more confident) together
//! with [`FailureLabels`]; samples whose evaluation mask is 0 are skipped.

mod ranking;
mod rc;
mod scoring;

use crate::error::{FdError, Result};
use crate::failure::FailureLabels;

pub use ranking::{ap_f, auroc_f, auroc_out, ApPositive};
pub use rc::{aurc, e_aurc, optimal_scores, rc_curve, EAurcMode, RiskCoverageCurve};
pub use scoring::{accuracy, brier, nll, NLL_FLOOR};

/// (score, residual) of every evaluated sample, in sample order.
fn masked_pairs(scores: &[f64], labels: &FailureLabels) -> Result<Vec<(f64, u8)>> {
    if scores.len() != labels.len() {
        return Err(FdError::InvalidParameter(format!(
            "{} scores but {} failure labels",
            scores.len(),
            labels.len()
        )));
    }
    let mut pairs = Vec::with_capacity(scores.len());
    for (i, &s) in scores.iter().enumerate() {
        if !labels.is_evaluated(i) {
            continue;
        }
        if !s.is_finite() {
            return Err(FdError::NonFiniteValue {
                file: "scores".into(),
                row: i + 1,
            });
        }
        pairs.push((s, labels.residuals[i]));
    }
    Ok(pairs)
}

/// Stable ascending sort on score, so ties keep sample order.
fn sort_ascending<T>(pairs: &mut [(f64, T)]) {
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));
}
