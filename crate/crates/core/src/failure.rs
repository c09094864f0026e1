//! Failure labels: which predictions are wrong, and which samples take part
//! in confidence-ranking evaluation.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::bundle::{PredictionBundle, ShiftTag};
use crate::error::{FdError, Result};

/// How failure labels are turned into an evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StudyKind {
    /// Every sample is evaluated.
    Standard,
    /// New-class shift: misclassified i.i.d. samples are dismissed from the
    /// ranking evaluation but still count towards accuracy.
    Newclass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureLabels {
    /// 1 where the prediction is wrong.
    pub residuals: Vec<u8>,
    pub predictions: Vec<usize>,
    /// 1 where the sample participates in confidence-ranking metrics.
    pub eval_mask: Vec<u8>,
}

impl FailureLabels {
    /// Labels with an all-ones mask, for callers that already hold residuals.
    pub fn unmasked(residuals: Vec<u8>) -> Self {
        let n = residuals.len();
        FailureLabels {
            predictions: vec![0; n],
            eval_mask: vec![1; n],
            residuals,
        }
    }

    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    pub fn eval_count(&self) -> usize {
        self.eval_mask.iter().filter(|&&m| m == 1).count()
    }

    pub fn is_evaluated(&self, i: usize) -> bool {
        self.eval_mask[i] == 1
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn failure_labels(bundle: &PredictionBundle, kind: StudyKind) -> Result<FailureLabels> {
    let tags = bundle.shift_tags();
    if kind == StudyKind::Newclass && !tags.iter().any(|t| t.is_new_class()) {
        return Err(FdError::EmptyNewClassStudy);
    }
    let ood = bundle.ood_class();
    let n = bundle.n_samples();
    let mut residuals = Vec::with_capacity(n);
    let mut predictions = Vec::with_capacity(n);
    let mut eval_mask = Vec::with_capacity(n);
    for (i, (&label, &tag)) in bundle.labels().iter().zip(tags).enumerate() {
        let pred = argmax(bundle.logit_row(i));
        let wrong = label == ood || pred != label;
        predictions.push(pred);
        residuals.push(wrong as u8);
        let dismissed = kind == StudyKind::Newclass && tag == ShiftTag::Iid && wrong;
        eval_mask.push((!dismissed) as u8);
    }
    Ok(FailureLabels {
        residuals,
        predictions,
        eval_mask,
    })
}
