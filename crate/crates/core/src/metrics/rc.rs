use serde::{Deserialize, Serialize};

use super::{masked_pairs, sort_ascending};
use crate::error::{FdError, Result};
use crate::failure::FailureLabels;

/// Risk-coverage curve over the unique confidence thresholds of the
/// evaluated samples.
///
/// Samples are removed one by one in ascending (score, index) order. A curve
/// point is emitted after the first removal and whenever the removed sample's
/// score differs from the previously removed one; removals that emit no point
/// accumulate weight that goes to the next point. Leftover weight after the
/// last removal closes the curve with a point at zero coverage that repeats
/// the last risk. The highest-scored sample is never removed, so without
/// that closing point the curve ends at coverage 1/N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCoverageCurve {
    pub coverages: Vec<f64>,
    pub risks: Vec<f64>,
    /// Coverage mass of each segment; one shorter than `coverages`.
    pub weights: Vec<f64>,
}

impl RiskCoverageCurve {
    pub fn len(&self) -> usize {
        self.coverages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coverages.is_empty()
    }

    /// Risk at full coverage.
    pub fn full_coverage_risk(&self) -> f64 {
        self.risks[0]
    }

    pub fn aurc(&self) -> f64 {
        aurc(self)
    }
}

pub fn rc_curve(scores: &[f64], labels: &FailureLabels) -> Result<RiskCoverageCurve> {
    let mut pairs = masked_pairs(scores, labels)?;
    if pairs.is_empty() {
        return Err(FdError::EmptyEvaluationSet);
    }
    sort_ascending(&mut pairs);

    let n = pairs.len();
    let total = n as f64;
    let mut errors: usize = pairs.iter().map(|&(_, r)| r as usize).sum();
    let mut coverages = vec![1.0];
    let mut risks = vec![errors as f64 / total];
    let mut weights = Vec::new();
    let mut pending = 0usize;

    for (removed, (score, residual)) in pairs.iter().take(n - 1).enumerate() {
        errors -= *residual as usize;
        pending += 1;
        let remaining = n - 1 - removed;
        let new_value = removed == 0 || *score != pairs[removed - 1].0;
        if new_value {
            coverages.push(remaining as f64 / total);
            risks.push(errors as f64 / remaining as f64);
            weights.push(pending as f64 / total);
            pending = 0;
        }
    }
    if pending > 0 {
        coverages.push(0.0);
        risks.push(*risks.last().expect("curve has a first point"));
        weights.push(pending as f64 / total);
    }
    Ok(RiskCoverageCurve {
        coverages,
        risks,
        weights,
    })
}

/// Trapezoidal area under the risk-coverage curve, in [0, 1].
pub fn aurc(curve: &RiskCoverageCurve) -> f64 {
    curve
        .weights
        .iter()
        .zip(curve.risks.windows(2))
        .map(|(w, r)| (r[0] + r[1]) * 0.5 * w)
        .sum()
}

/// Reference subtracted by [`e_aurc`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EAurcMode {
    /// AURC minus the AURC of the empirically optimal CSF, which ranks every
    /// failure strictly below every success (ties broken by sample index).
    #[default]
    OptimalOracle,
    /// AURC + (1 − r̂) · ln(1 − r̂), r̂ the full-coverage risk.
    ClosedFormPlus,
    /// AURC − acc · ln(acc), acc = 1 − r̂.
    ClosedFormMinus,
}

/// Distinct scores that put all failures below all successes.
pub fn optimal_scores(residuals: &[u8]) -> Vec<f64> {
    let half_n = 2.0 * residuals.len() as f64;
    residuals
        .iter()
        .enumerate()
        .map(|(i, &r)| (1 - r) as f64 + i as f64 / half_n)
        .collect()
}

pub fn e_aurc(curve: &RiskCoverageCurve, labels: &FailureLabels, mode: EAurcMode) -> Result<f64> {
    let value = aurc(curve);
    let xlnx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    let accuracy = 1.0 - curve.full_coverage_risk();
    Ok(match mode {
        EAurcMode::OptimalOracle => {
            let optimal = rc_curve(&optimal_scores(&labels.residuals), labels)?;
            value - aurc(&optimal)
        }
        EAurcMode::ClosedFormPlus => value + xlnx(accuracy),
        EAurcMode::ClosedFormMinus => value - xlnx(accuracy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unmasked(r: &[u8]) -> FailureLabels {
        FailureLabels::unmasked(r.to_vec())
    }

    #[test]
    fn four_sample_trace() {
        let c = rc_curve(&[0.9, 0.8, 0.7, 0.6], &unmasked(&[0, 0, 1, 0])).unwrap();
        assert_eq!(c.coverages, vec![1.0, 0.75, 0.5, 0.25]);
        assert_eq!(c.weights, vec![0.25; 3]);
        assert_eq!(c.risks, vec![0.25, 1.0 / 3.0, 0.0, 0.0]);
        assert!((aurc(&c) - 11.0 / 96.0).abs() < 1e-15);
    }

    #[test]
    fn no_failures_zero_area() {
        let c = rc_curve(&[0.3, 0.3, 0.9, 0.1], &unmasked(&[0; 4])).unwrap();
        assert_eq!(aurc(&c), 0.0);
    }

    #[test]
    fn all_failures_distinct_scores() {
        let c = rc_curve(&[0.4, 0.3, 0.2, 0.1], &unmasked(&[1; 4])).unwrap();
        assert_eq!(c.risks, vec![1.0; 4]);
        assert!((aurc(&c) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn single_sample() {
        let c = rc_curve(&[0.5], &unmasked(&[0])).unwrap();
        assert_eq!(c.coverages, vec![1.0]);
        assert!(c.weights.is_empty());
        assert_eq!(aurc(&c), 0.0);
    }

    #[test]
    fn tied_tail_closes_at_zero_coverage() {
        let c = rc_curve(&[0.5; 4], &unmasked(&[1, 0, 0, 0])).unwrap();
        assert_eq!(*c.coverages.last().unwrap(), 0.0);
        assert_eq!(c.weights.iter().sum::<f64>(), 0.75);
        assert!(c.coverages.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn masked_samples_ignored() {
        let labels = FailureLabels {
            residuals: vec![0, 1, 0],
            predictions: vec![0; 3],
            eval_mask: vec![1, 0, 1],
        };
        let c = rc_curve(&[0.9, 0.1, 0.5], &labels).unwrap();
        assert_eq!(aurc(&c), 0.0);
        assert_eq!(c.coverages, vec![1.0, 0.5]);
    }

    #[test]
    fn empty_evaluation_rejected() {
        let labels = FailureLabels {
            residuals: vec![1],
            predictions: vec![0],
            eval_mask: vec![0],
        };
        assert!(matches!(rc_curve(&[0.2], &labels), Err(FdError::EmptyEvaluationSet)));
    }

    #[test]
    fn e_aurc_zero_for_perfect_ranking() {
        let labels = unmasked(&[1, 0, 1, 0, 0]);
        let scores = [0.1, 0.7, 0.2, 0.8, 0.9];
        let c = rc_curve(&scores, &labels).unwrap();
        assert!(e_aurc(&c, &labels, EAurcMode::OptimalOracle).unwrap().abs() < 1e-12);
    }

    #[test]
    fn e_aurc_zero_when_all_correct() {
        let labels = unmasked(&[0; 6]);
        let c = rc_curve(&[0.3, 0.1, 0.3, 0.9, 0.2, 0.0], &labels).unwrap();
        for mode in [EAurcMode::OptimalOracle, EAurcMode::ClosedFormPlus, EAurcMode::ClosedFormMinus] {
            assert_eq!(e_aurc(&c, &labels, mode).unwrap(), 0.0);
        }
    }

    #[test]
    fn closed_forms_differ_in_sign() {
        let labels = unmasked(&[1, 0, 0, 0]);
        let c = rc_curve(&[0.1, 0.2, 0.3, 0.4], &labels).unwrap();
        let base = aurc(&c);
        let plus = e_aurc(&c, &labels, EAurcMode::ClosedFormPlus).unwrap();
        let minus = e_aurc(&c, &labels, EAurcMode::ClosedFormMinus).unwrap();
        assert!((plus - base - 0.75 * 0.75f64.ln()).abs() < 1e-15);
        assert!((minus - base + 0.75 * 0.75f64.ln()).abs() < 1e-15);
    }
}
