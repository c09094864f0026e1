//! Class-conditional Gaussian scoring in feature space with a shared,
//! ridge-regularised covariance.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;

use crate::error::{FdError, Result};

/// Ridge added to the diagonal of the shared covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    /// λ = factor · trace(Σ) / D. Falls back to λ = factor when the trace is 0.
    RelativeTrace(f64),
    Absolute(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::RelativeTrace(1e-6)
    }
}

#[derive(Debug, Clone)]
pub struct MahaModel {
    means: Vec<DVector<f64>>,
    /// Lower Cholesky factor of the regularised covariance.
    chol_l: DMatrix<f64>,
    ridge: f64,
}

impl MahaModel {
    /// Builds a model from explicit class means and a covariance matrix
    /// (row-major, D × D). No ridge is added.
    pub fn from_parts(means: &[Vec<f64>], covariance: &[f64]) -> Result<Self> {
        let d = means.first().map_or(0, |m| m.len());
        if d == 0 || means.iter().any(|m| m.len() != d) || covariance.len() != d * d {
            return Err(FdError::InvalidParameter("means and covariance dimensions disagree".into()));
        }
        let cov = DMatrix::from_row_slice(d, d, covariance);
        Self::from_covariance(means.iter().map(|m| DVector::from_column_slice(m)).collect(), cov, 0.0)
    }

    fn from_covariance(means: Vec<DVector<f64>>, cov: DMatrix<f64>, ridge: f64) -> Result<Self> {
        let chol = cov.cholesky().ok_or(FdError::SingularCovariance)?;
        Ok(MahaModel {
            means,
            chol_l: chol.l(),
            ridge,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.chol_l.nrows()
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Squared Mahalanobis distance from `x` to the mean of `class`.
    pub fn squared_distance(&self, x: &[f64], class: usize) -> f64 {
        let diff = DVector::from_column_slice(x) - &self.means[class];
        let y = self
            .chol_l
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        y.norm_squared()
    }

    /// Negated minimum squared distance over classes; higher is more confident.
    pub fn score(&self, x: &[f64]) -> f64 {
        let min = (0..self.n_classes())
            .map(|c| self.squared_distance(x, c))
            .fold(f64::INFINITY, f64::min);
        -min
    }
}

/// Fits class means and the shared covariance of class-centred features.
pub fn fit_mahalanobis(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    ridge: Ridge,
) -> Result<MahaModel> {
    let (m, d) = features.dim();
    if labels.len() != m {
        return Err(FdError::InvalidParameter(format!(
            "{m} feature rows but {} labels",
            labels.len()
        )));
    }
    if d == 0 {
        return Err(FdError::MissingFeatures);
    }
    let mut counts = vec![0usize; n_classes];
    let mut sums = vec![DVector::<f64>::zeros(d); n_classes];
    for (row, &label) in features.outer_iter().zip(labels) {
        if label >= n_classes {
            return Err(FdError::InvalidParameter(format!(
                "training label {label} outside [0, {n_classes})"
            )));
        }
        counts[label] += 1;
        for (s, &v) in sums[label].iter_mut().zip(row.iter()) {
            *s += v;
        }
    }
    if let Some((class, &count)) = counts.iter().enumerate().find(|(_, &c)| c < 2) {
        return Err(FdError::ClassUnderpopulated { class, count });
    }
    let means: Vec<DVector<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();

    let mut cov = DMatrix::<f64>::zeros(d, d);
    for (row, &label) in features.outer_iter().zip(labels) {
        let centred = DVector::from_iterator(d, row.iter().copied()) - &means[label];
        cov.syger(1.0, &centred, &centred, 1.0);
    }
    cov /= m as f64;

    let lambda = match ridge {
        Ridge::Absolute(l) => l,
        Ridge::RelativeTrace(f) => {
            let trace = cov.trace();
            if trace > 0.0 {
                f * trace / d as f64
            } else {
                f
            }
        }
    };
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(FdError::InvalidParameter(format!("ridge must be non-negative, got {lambda}")));
    }
    for i in 0..d {
        cov[(i, i)] += lambda;
    }
    MahaModel::from_covariance(means, cov, lambda)
}

/// Scores every row of `features` with the fitted model.
pub fn score_mahalanobis(model: &MahaModel, features: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    if features.ncols() != model.dim() {
        return Err(FdError::ShapeMismatch {
            file: "features".into(),
            row: None,
            detail: format!("model dimension {} but features have {} columns", model.dim(), features.ncols()),
        });
    }
    Ok(features
        .outer_iter()
        .map(|row| model.score(&row.to_vec()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_unit_means_identity_covariance() {
        let model = MahaModel::from_parts(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(model.score(&[1.0, 0.0]), 0.0);
        assert!((model.score(&[0.5, 0.5]) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_distance_at_fitted_mean() {
        let f = array![[1.0, 2.0], [3.0, 2.0], [-1.0, 0.0], [-3.0, 1.0]];
        let model = fit_mahalanobis(f.view(), &[0, 0, 1, 1], 2, Ridge::Absolute(1e3)).unwrap();
        assert_eq!(model.score(&[2.0, 2.0]), 0.0);
        assert!(model.score(&[5.0, 5.0]) < 0.0);
    }

    #[test]
    fn degenerate_features_stay_finite() {
        let f = array![[1.0, 1.0], [1.0, 1.0], [2.0, 2.0], [2.0, 2.0]];
        let model = fit_mahalanobis(f.view(), &[0, 0, 1, 1], 2, Ridge::Absolute(1e-6)).unwrap();
        let scores = score_mahalanobis(&model, f.view()).unwrap();
        assert!(scores.iter().all(|s| s.is_finite()));
        // Default relative ridge with zero trace also stays invertible.
        assert!(fit_mahalanobis(f.view(), &[0, 0, 1, 1], 2, Ridge::default()).is_ok());
    }

    #[test]
    fn underpopulated_class_rejected() {
        let f = array![[0.0], [1.0], [2.0]];
        let err = fit_mahalanobis(f.view(), &[0, 0, 1], 2, Ridge::default()).unwrap_err();
        assert!(matches!(err, FdError::ClassUnderpopulated { class: 1, count: 1 }));
    }

    #[test]
    fn singular_without_ridge() {
        let f = array![[1.0, 1.0], [1.0, 1.0], [2.0, 2.0], [2.0, 2.0]];
        let err = fit_mahalanobis(f.view(), &[0, 0, 1, 1], 2, Ridge::Absolute(0.0)).unwrap_err();
        assert!(matches!(err, FdError::SingularCovariance));
    }
}
