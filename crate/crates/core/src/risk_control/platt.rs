use serde::{Deserialize, Serialize};

use crate::error::{FdError, Result};

/// Logistic recalibration p = σ(a · s + b) of the success probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattModel {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlattOptions {
    /// Use Platt's prior-corrected targets instead of raw 0/1.
    pub smoothing: bool,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for PlattOptions {
    fn default() -> Self {
        PlattOptions {
            smoothing: false,
            max_iter: 100,
            grad_tol: 1e-10,
        }
    }
}

/// |a| beyond this means the scores separate the labels and the fit diverges.
pub const SEPARATION_LIMIT: f64 = 1e4;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Mean negative log-likelihood of the targets under (a, b).
fn loss(scores: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(targets)
        .map(|(&s, &t)| {
            let z = a * s + b;
            t * softplus(-z) + (1.0 - t) * softplus(z)
        })
        .sum();
    total / scores.len() as f64
}

/// True when one outcome scores strictly above the other everywhere; the
/// unsmoothed likelihood then has no finite maximiser.
fn separated(scores: &[f64], residuals: &[u8]) -> bool {
    let range = |want: u8| {
        scores
            .iter()
            .zip(residuals)
            .filter(|(_, &r)| r == want)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&s, _)| (lo.min(s), hi.max(s)))
    };
    let (succ_lo, succ_hi) = range(0);
    let (fail_lo, fail_hi) = range(1);
    fail_hi < succ_lo || succ_hi < fail_lo
}

pub fn platt_fit(scores: &[f64], residuals: &[u8]) -> Result<PlattModel> {
    platt_fit_with(scores, residuals, &PlattOptions::default())
}

/// Damped Newton minimisation of the logistic loss of the success indicator.
pub fn platt_fit_with(scores: &[f64], residuals: &[u8], opts: &PlattOptions) -> Result<PlattModel> {
    if scores.len() != residuals.len() {
        return Err(FdError::InvalidParameter(format!(
            "{} scores but {} residuals",
            scores.len(),
            residuals.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(FdError::InvalidParameter("scores must be finite".into()));
    }
    let n_pos = residuals.iter().filter(|&&r| r == 0).count();
    let n_neg = residuals.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(FdError::DegenerateLabels("Platt scaling needs both successes and failures"));
    }
    if !opts.smoothing && separated(scores, residuals) {
        return Err(FdError::PerfectSeparation(f64::INFINITY));
    }
    let (t_pos, t_neg) = if opts.smoothing {
        ((n_pos as f64 + 1.0) / (n_pos as f64 + 2.0), 1.0 / (n_neg as f64 + 2.0))
    } else {
        (1.0, 0.0)
    };
    let targets: Vec<f64> = residuals.iter().map(|&r| if r == 0 { t_pos } else { t_neg }).collect();
    let n = scores.len() as f64;

    let prior = targets.iter().sum::<f64>() / n;
    let (mut a, mut b) = (0.0, (prior / (1.0 - prior)).ln());
    let mut current = loss(scores, &targets, a, b);

    for _ in 0..opts.max_iter {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&s, &t) in scores.iter().zip(&targets) {
            let p = sigmoid(a * s + b);
            let d = p - t;
            let w = p * (1.0 - p);
            ga += d * s;
            gb += d;
            haa += w * s * s;
            hab += w * s;
            hbb += w;
        }
        let (ga, gb) = (ga / n, gb / n);
        if ga.hypot(gb) < opts.grad_tol {
            break;
        }
        // Small diagonal shift keeps the solve defined near separation.
        let (haa, hab, hbb) = (haa / n + 1e-12, hab / n, hbb / n + 1e-12);
        let det = haa * hbb - hab * hab;
        let (da, db) = ((hbb * ga - hab * gb) / det, (haa * gb - hab * ga) / det);

        let mut step = 1.0;
        loop {
            let (na, nb) = (a - step * da, b - step * db);
            let candidate = loss(scores, &targets, na, nb);
            if candidate <= current - 1e-4 * step * (ga * da + gb * db) || step < 1e-10 {
                a = na;
                b = nb;
                current = candidate;
                break;
            }
            step *= 0.5;
        }
        if a.abs() > SEPARATION_LIMIT {
            return Err(FdError::PerfectSeparation(a));
        }
    }
    Ok(PlattModel { a, b })
}

pub fn platt_apply(model: &PlattModel, scores: &[f64]) -> Vec<f64> {
    scores.iter().map(|&s| sigmoid(model.a * s + model.b)).collect()
}
