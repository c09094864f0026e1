//! Round-to-one errors of the softmax at reduced float precision and what
//! they do to confidence ranking.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{PredictionBundle, ShiftTag};
use crate::error::{FdError, Result};
use crate::failure::FailureLabels;
use crate::metrics;
use crate::scores::{softmax, Precision, SoftmaxConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditMode {
    /// Logits are stored at the target precision, then the softmax runs there.
    #[default]
    Quantize,
    /// Logits stay in f64 and are max-shifted there; only the softmax
    /// arithmetic is reduced.
    ComputeOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionStats {
    pub round_to_one_rate: f64,
    pub round_to_one_count: usize,
    pub aurc: f64,
    /// `None` when every sample succeeds or every sample fails.
    pub auroc_f: Option<f64>,
    /// Accuracy of the argmax over the logits as seen at this precision.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionAuditReport {
    pub mode: AuditMode,
    pub temperature: f64,
    pub per_precision: BTreeMap<Precision, PrecisionStats>,
}

struct RowResult {
    msr: f64,
    rounded: bool,
    pred: usize,
}

fn audit_row(row: &[f64], cfg: &SoftmaxConfig, mode: AuditMode) -> RowResult {
    let seen: Vec<f64> = match mode {
        AuditMode::Quantize => row.iter().map(|&x| cfg.precision.quantize(x)).collect(),
        AuditMode::ComputeOnly => {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.iter().map(|&x| x - max).collect()
        }
    };
    let probs = softmax(&seen, cfg);
    let msr = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pred = (1..seen.len()).fold(0, |m, j| if seen[j] > seen[m] { j } else { m });
    // A fully tied row carries no ranking information, so it cannot lose any.
    let tied = seen.iter().all(|&v| v == seen[0]);
    RowResult {
        msr,
        rounded: msr == 1.0 && !tied,
        pred,
    }
}

/// Runs the MSR pipeline at each precision and measures round-to-one errors,
/// AURC and AUROC_f against the given residuals.
pub fn audit(
    bundle: &PredictionBundle,
    residuals: &[u8],
    precisions: &[Precision],
    temperature: f64,
    mode: AuditMode,
) -> Result<PrecisionAuditReport> {
    let n = bundle.n_samples();
    if residuals.len() != n {
        return Err(FdError::InvalidParameter(format!(
            "{} residuals for {n} samples",
            residuals.len()
        )));
    }
    let labels = FailureLabels::unmasked(residuals.to_vec());
    let mut per_precision = BTreeMap::new();
    for &precision in precisions {
        let cfg = SoftmaxConfig::new(precision, temperature)?;
        let rows: Vec<RowResult> = (0..n)
            .map(|i| audit_row(&bundle.logit_row(i).to_vec(), &cfg, mode))
            .collect();
        let msr: Vec<f64> = rows.iter().map(|r| r.msr).collect();
        let count = rows.iter().filter(|r| r.rounded).count();
        let correct = rows
            .iter()
            .zip(bundle.labels())
            .filter(|(r, &y)| r.pred == y)
            .count();
        let auroc_f = match metrics::auroc_f(&msr, &labels) {
            Ok(v) => Some(v),
            Err(FdError::DegenerateLabels(_)) => None,
            Err(e) => return Err(e),
        };
        per_precision.insert(
            precision,
            PrecisionStats {
                round_to_one_rate: count as f64 / n as f64,
                round_to_one_count: count,
                aurc: metrics::rc_curve(&msr, &labels)?.aurc(),
                auroc_f,
                accuracy: correct as f64 / n as f64,
            },
        );
    }
    Ok(PrecisionAuditReport {
        mode,
        temperature,
        per_precision,
    })
}

/// Seeded bundle of very confident predictions. The predicted class leads
/// the runner-up by a gap drawn from [gap_low, gap_high] for correct samples
/// and from the lower half of that range for failures, so confidence ranks
/// failures well at full precision. The remaining classes sit slightly below
/// the runner-up.
pub fn synthesize_highconf_bundle(
    n: usize,
    c: usize,
    failure_rate: f64,
    gap_low: f64,
    gap_high: f64,
    seed: u64,
) -> Result<PredictionBundle> {
    if n == 0 || c < 2 {
        return Err(FdError::InvalidParameter(format!(
            "need n ≥ 1 and c ≥ 2, got n = {n}, c = {c}"
        )));
    }
    if !(failure_rate > 0.0 && failure_rate < 1.0) {
        return Err(FdError::InvalidParameter(format!(
            "failure rate must lie in (0, 1), got {failure_rate}"
        )));
    }
    if !(gap_low >= 0.0 && gap_high >= gap_low && gap_high.is_finite()) {
        return Err(FdError::InvalidParameter(format!(
            "need 0 ≤ gap_low ≤ gap_high, got [{gap_low}, {gap_high}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |lo: f64, hi: f64| if hi > lo { rng.random_range(lo..hi) } else { lo };
    let mut logits = Array2::<f64>::zeros((n, c));
    let mut labels = Vec::with_capacity(n);
    let mid = 0.5 * (gap_low + gap_high);
    for i in 0..n {
        let fails = uniform(0.0, 1.0) < failure_rate;
        let gap = if fails { uniform(gap_low, mid) } else { uniform(gap_low, gap_high) };
        let top = uniform(0.0, c as f64) as usize % c;
        let runner_up = (top + 1 + uniform(0.0, (c - 1) as f64) as usize % (c - 1)) % c;
        for j in 0..c {
            logits[[i, j]] = if j == top {
                gap
            } else if j == runner_up {
                0.0
            } else {
                -gap * uniform(0.0, 1.0) / 80.0
            };
        }
        let row = logits.row(i);
        let pred = (1..c).fold(0, |m, j| if row[j] > row[m] { j } else { m });
        let label = if fails {
            (pred + 1 + uniform(0.0, (c - 1) as f64) as usize % (c - 1)) % c
        } else {
            pred
        };
        labels.push(label);
    }
    PredictionBundle::new(logits, labels, vec![ShiftTag::Iid; n])
}
