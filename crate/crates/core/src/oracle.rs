//! Brute-force reference implementations for cross-checking `metrics`.
//!
//! Nothing here calls into the metrics module. The AURC routine is a
//! line-by-line trace of the reference procedure; the AUROC routine counts
//! every positive/negative pair.

// Index loops are kept on purpose: they mirror the reference procedure.
#![allow(clippy::needless_range_loop)]

use crate::error::{FdError, Result};

/// Full trace of the reference AURC procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct AurcTrace {
    pub coverages: Vec<f64>,
    pub risks: Vec<f64>,
    pub weights: Vec<f64>,
    pub aurc: f64,
}

pub fn aurc_trace(scores: &[f64], residuals: &[u8], mask: &[u8]) -> Result<AurcTrace> {
    let mut confidence = Vec::new();
    let mut resid = Vec::new();
    for i in 0..scores.len() {
        if mask[i] == 1 {
            confidence.push(scores[i]);
            resid.push(residuals[i] as f64);
        }
    }
    let n = resid.len();
    if n == 0 {
        return Err(FdError::EmptyEvaluationSet);
    }

    let mut idx_sorted: Vec<usize> = (0..n).collect();
    // Stable: equal confidences keep their sample order.
    idx_sorted.sort_by(|&a, &b| confidence[a].partial_cmp(&confidence[b]).unwrap());

    let mut coverages = Vec::new();
    let mut risks = Vec::new();
    let mut cov = n;
    let mut error_sum: f64 = 0.0;
    for &i in &idx_sorted {
        error_sum += resid[i];
    }
    coverages.push(cov as f64 / n as f64);
    risks.push(error_sum / n as f64);
    let mut weights = Vec::new();
    let mut tmp_weight = 0.0;

    for i in 0..n - 1 {
        cov -= 1;
        error_sum -= resid[idx_sorted[i]];
        let selective_risk = error_sum / (n - 1 - i) as f64;
        tmp_weight += 1.0;
        if i == 0 || confidence[idx_sorted[i]] != confidence[idx_sorted[i - 1]] {
            coverages.push(cov as f64 / n as f64);
            risks.push(selective_risk);
            weights.push(tmp_weight / n as f64);
            tmp_weight = 0.0;
        }
    }

    if tmp_weight > 0.0 {
        coverages.push(0.0);
        risks.push(risks[risks.len() - 1]);
        weights.push(tmp_weight / n as f64);
    }

    let mut aurc = 0.0;
    for i in 0..weights.len() {
        aurc += (risks[i] + risks[i + 1]) * 0.5 * weights[i];
    }
    Ok(AurcTrace {
        coverages,
        risks,
        weights,
        aurc,
    })
}

pub fn aurc_oracle(scores: &[f64], residuals: &[u8], mask: &[u8]) -> Result<f64> {
    Ok(aurc_trace(scores, residuals, mask)?.aurc)
}

/// Pairwise Mann-Whitney AUROC: (#(pos > neg) + ½ #(pos == neg)) / (#pos · #neg).
/// `positive[i]` marks the class expected to score high.
pub fn auroc_oracle(scores: &[f64], positive: &[bool]) -> Result<f64> {
    let mut greater = 0u64;
    let mut equal = 0u64;
    let mut n_pos = 0u64;
    let mut n_neg = 0u64;
    for i in 0..scores.len() {
        if positive[i] {
            n_pos += 1;
        } else {
            n_neg += 1;
        }
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(FdError::DegenerateLabels("AUROC needs both positive and negative samples"));
    }
    for i in 0..scores.len() {
        if !positive[i] {
            continue;
        }
        for j in 0..scores.len() {
            if positive[j] {
                continue;
            }
            if scores[i] > scores[j] {
                greater += 1;
            } else if scores[i] == scores[j] {
                equal += 1;
            }
        }
    }
    Ok((greater as f64 + 0.5 * equal as f64) / (n_pos as f64 * n_neg as f64))
}
