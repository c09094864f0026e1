use serde::{Deserialize, Serialize};

use super::{masked_pairs, sort_ascending};
use crate::error::{FdError, Result};
use crate::failure::FailureLabels;

/// ROC area for separating positives (scored high) from negatives, computed
/// from mid-ranks. Tied positive/negative pairs count one half.
fn auroc_ranked(mut pairs: Vec<(f64, bool)>) -> Result<f64> {
    let positives = pairs.iter().filter(|p| p.1).count();
    let negatives = pairs.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(FdError::DegenerateLabels("AUROC needs both positive and negative samples"));
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));

    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end].0 == pairs[start].0 {
            end += 1;
        }
        // Ranks start..end (1-based start+1 ..= end) share their mean.
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        let group_pos = pairs[start..end].iter().filter(|p| p.1).count();
        rank_sum += mid_rank * group_pos as f64;
        start = end;
    }
    let p = positives as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Failure-detection AUROC: successes are the positive class.
pub fn auroc_f(scores: &[f64], labels: &FailureLabels) -> Result<f64> {
    let pairs = masked_pairs(scores, labels)?;
    auroc_ranked(pairs.into_iter().map(|(s, r)| (s, r == 0)).collect())
}

/// Out-of-distribution AUROC with inliers (`outlier == 0`) as positives.
pub fn auroc_out(scores: &[f64], outlier: &[u8]) -> Result<f64> {
    if scores.len() != outlier.len() {
        return Err(FdError::InvalidParameter(format!(
            "{} scores but {} outlier labels",
            scores.len(),
            outlier.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(FdError::InvalidParameter("scores must be finite".into()));
    }
    auroc_ranked(scores.iter().zip(outlier).map(|(&s, &o)| (s, o == 0)).collect())
}

/// Which outcome counts as positive for average precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ApPositive {
    /// Successes, retrieved from the highest score down.
    Success,
    /// Failures, retrieved from the lowest score up.
    Failure,
}

/// Step-interpolated average precision over unique-score thresholds.
pub fn ap_f(scores: &[f64], labels: &FailureLabels, positive: ApPositive) -> Result<f64> {
    let mut pairs: Vec<(f64, bool)> = masked_pairs(scores, labels)?
        .into_iter()
        .map(|(s, r)| match positive {
            ApPositive::Success => (s, r == 0),
            ApPositive::Failure => (-s, r == 1),
        })
        .collect();
    let total_pos = pairs.iter().filter(|p| p.1).count();
    if total_pos == 0 {
        return Err(FdError::DegenerateLabels("average precision needs at least one positive sample"));
    }
    sort_ascending(&mut pairs);
    pairs.reverse();

    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let value = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == value {
            tp += pairs[i].1 as usize;
            i += 1;
        }
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / i as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}
