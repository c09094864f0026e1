use crate::error::{FdError, Result};

pub const DEFAULT_BINS: usize = 15;

/// Bin of a probability under equal-width, right-closed bins; 0 joins the
/// first bin and 1 the last.
pub fn bin_index(p: f64, bins: usize) -> usize {
    ((p * bins as f64).ceil() as usize).saturating_sub(1).min(bins - 1)
}

/// Expected calibration error: Σ_b (n_b / N) · |acc_b − conf_b|.
pub fn ece(probabilities: &[f64], residuals: &[u8], bins: usize) -> Result<f64> {
    if bins == 0 {
        return Err(FdError::InvalidParameter("ECE needs at least one bin".into()));
    }
    if probabilities.len() != residuals.len() {
        return Err(FdError::InvalidParameter(format!(
            "{} probabilities but {} residuals",
            probabilities.len(),
            residuals.len()
        )));
    }
    if probabilities.is_empty() {
        return Err(FdError::EmptyEvaluationSet);
    }
    if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(FdError::InvalidParameter(format!(
            "ECE expects probabilities in [0, 1], got {p}"
        )));
    }
    let mut count = vec![0usize; bins];
    let mut conf = vec![0.0; bins];
    let mut correct = vec![0usize; bins];
    for (&p, &r) in probabilities.iter().zip(residuals) {
        let b = bin_index(p, bins);
        count[b] += 1;
        conf[b] += p;
        correct[b] += (r == 0) as usize;
    }
    let n = probabilities.len() as f64;
    Ok((0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let nb = count[b] as f64;
            (nb / n) * (correct[b] as f64 / nb - conf[b] / nb).abs()
        })
        .sum())
}
