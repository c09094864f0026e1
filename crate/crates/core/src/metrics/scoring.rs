use crate::error::{FdError, Result};

/// Smallest probability used inside the log of [`nll`].
pub const NLL_FLOOR: f64 = 1e-300;

/// Fraction of correct predictions.
pub fn accuracy(residuals: &[u8]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(FdError::EmptyEvaluationSet);
    }
    let correct = residuals.iter().filter(|&&r| r == 0).count();
    Ok(correct as f64 / residuals.len() as f64)
}

fn check(probabilities: &[Vec<f64>], labels: &[usize]) -> Result<()> {
    if probabilities.is_empty() {
        return Err(FdError::EmptyEvaluationSet);
    }
    if probabilities.len() != labels.len() {
        return Err(FdError::InvalidParameter(format!(
            "{} probability rows but {} labels",
            probabilities.len(),
            labels.len()
        )));
    }
    for (row, (p, &y)) in probabilities.iter().zip(labels).enumerate() {
        if y >= p.len() {
            return Err(FdError::LabelOutOfRange {
                file: "labels".into(),
                row: row + 1,
                value: y as i64,
            });
        }
    }
    Ok(())
}

/// Mean negative log-likelihood of the true class.
pub fn nll(probabilities: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    check(probabilities, labels)?;
    let total: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(p, &y)| -p[y].max(NLL_FLOOR).ln())
        .sum();
    Ok(total / labels.len() as f64)
}

/// Mean squared distance between the probability vector and the one-hot label.
pub fn brier(probabilities: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    check(probabilities, labels)?;
    let total: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(p, &y)| {
            p.iter()
                .enumerate()
                .map(|(c, &pc)| {
                    let target = if c == y { 1.0 } else { 0.0 };
                    (pc - target).powi(2)
                })
                .sum::<f64>()
        })
        .sum();
    Ok(total / labels.len() as f64)
}
