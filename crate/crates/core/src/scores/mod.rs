//! Confidence scoring functions (CSFs).
//!
//! Every [`ConfidenceVector`] is oriented so that a higher score means a more
//! confident prediction. Entropy, mutual-information and distance based
//! scores are therefore stored negated.

mod mahalanobis;
mod softmax;

use std::fmt;
use std::str::FromStr;

use ndarray::{Axis, Zip};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bundle::{PredictionBundle, ShiftTag};
use crate::error::{FdError, Result};

pub use mahalanobis::{fit_mahalanobis, score_mahalanobis, MahaModel, Ridge};
pub use softmax::{softmax, Precision, SoftmaxConfig};

/// Identity of a confidence scoring function.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CsfId {
    Msr,
    Pe,
    Mls,
    McdMsr,
    McdPe,
    McdEe,
    McdMi,
    McdMls,
    Maha,
    External(String),
}

impl CsfId {
    pub fn needs_mcd(&self) -> bool {
        matches!(
            self,
            CsfId::McdMsr | CsfId::McdPe | CsfId::McdEe | CsfId::McdMi | CsfId::McdMls
        )
    }
}

impl fmt::Display for CsfId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CsfId::Msr => "msr",
            CsfId::Pe => "pe",
            CsfId::Mls => "mls",
            CsfId::McdMsr => "mcd_msr",
            CsfId::McdPe => "mcd_pe",
            CsfId::McdEe => "mcd_ee",
            CsfId::McdMi => "mcd_mi",
            CsfId::McdMls => "mcd_mls",
            CsfId::Maha => "maha",
            CsfId::External(name) => return write!(f, "ext:{name}"),
        };
        f.write_str(s)
    }
}

impl FromStr for CsfId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(name) = s.strip_prefix("ext:").or_else(|| s.strip_prefix("external:")) {
            if name.is_empty() {
                return Err("external CSF needs a column name".into());
            }
            return Ok(CsfId::External(name.to_string()));
        }
        Ok(match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "msr" => CsfId::Msr,
            "pe" => CsfId::Pe,
            "mls" => CsfId::Mls,
            "mcd_msr" => CsfId::McdMsr,
            "mcd_pe" => CsfId::McdPe,
            "mcd_ee" => CsfId::McdEe,
            "mcd_mi" => CsfId::McdMi,
            "mcd_mls" => CsfId::McdMls,
            "maha" => CsfId::Maha,
            other => return Err(format!("unknown CSF `{other}`")),
        })
    }
}

impl Serialize for CsfId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CsfId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One CSF's scores for every sample of a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceVector {
    pub csf: CsfId,
    pub scores: Vec<f64>,
    pub precision: Precision,
}

impl ConfidenceVector {
    pub fn new(csf: CsfId, scores: Vec<f64>, precision: Precision) -> Result<Self> {
        if let Some(row) = scores.iter().position(|s| s.is_nan()) {
            return Err(FdError::NonFiniteValue {
                file: format!("scores[{csf}]"),
                row: row + 1,
            });
        }
        Ok(ConfidenceVector { csf, scores, precision })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Shannon entropy in nats, with 0 · ln 0 = 0.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Computes one CSF over every sample of the bundle.
///
/// `Maha` fits class means and covariance on the bundle's own IID samples
/// (using their labels) and scores all samples; use [`fit_mahalanobis`]
/// directly to fit on a separate training split.
pub fn compute_csf(bundle: &PredictionBundle, csf: &CsfId, cfg: &SoftmaxConfig) -> Result<ConfidenceVector> {
    cfg.validate()?;
    let scores = match csf {
        CsfId::Msr | CsfId::Pe => bundle
            .logits()
            .outer_iter()
            .map(|row| {
                let p = softmax(&row.to_vec(), cfg);
                match csf {
                    CsfId::Msr => max_of(p),
                    _ => -entropy(&p),
                }
            })
            .collect(),
        CsfId::Mls => bundle.logits().outer_iter().map(|row| max_of(row.iter().copied())).collect(),
        CsfId::McdMsr | CsfId::McdPe | CsfId::McdEe | CsfId::McdMi | CsfId::McdMls => mcd_scores(bundle, csf, cfg)?,
        CsfId::Maha => maha_self_fit(bundle)?,
        CsfId::External(name) => bundle
            .external_scores()
            .get(name)
            .cloned()
            .ok_or_else(|| FdError::UnknownExternal(name.clone()))?,
    };
    ConfidenceVector::new(csf.clone(), scores, cfg.precision)
}

/// Per-sample MCD summaries from the (sample, pass, class) stack.
fn mcd_scores(bundle: &PredictionBundle, csf: &CsfId, cfg: &SoftmaxConfig) -> Result<Vec<f64>> {
    let stack = bundle.mcd_logits().ok_or(FdError::MissingMcdStack)?;
    let passes = stack.len_of(Axis(1)) as f64;
    let c = bundle.n_classes();
    let mut out = Vec::with_capacity(bundle.n_samples());
    for sample in stack.outer_iter() {
        if *csf == CsfId::McdMls {
            let mean = sample.sum_axis(Axis(0)) / passes;
            out.push(max_of(mean.iter().copied()));
            continue;
        }
        let mut mean_p = vec![0.0; c];
        let mut mean_entropy = 0.0;
        for pass in sample.outer_iter() {
            let p = softmax(&pass.to_vec(), cfg);
            mean_entropy += entropy(&p);
            for (m, v) in mean_p.iter_mut().zip(&p) {
                *m += v;
            }
        }
        mean_entropy /= passes;
        mean_p.iter_mut().for_each(|m| *m /= passes);
        let score = match csf {
            CsfId::McdMsr => max_of(mean_p.iter().copied()),
            CsfId::McdPe => -entropy(&mean_p),
            CsfId::McdEe => -mean_entropy,
            CsfId::McdMi => -(entropy(&mean_p) - mean_entropy),
            _ => unreachable!("non-MCD CSF routed to mcd_scores"),
        };
        out.push(score);
    }
    Ok(out)
}

fn maha_self_fit(bundle: &PredictionBundle) -> Result<Vec<f64>> {
    let features = bundle.features().ok_or(FdError::MissingFeatures)?;
    let train: Vec<usize> = bundle
        .shift_tags()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t == ShiftTag::Iid)
        .map(|(i, _)| i)
        .collect();
    let train_features = features.select(Axis(0), &train);
    let train_labels: Vec<usize> = train.iter().map(|&i| bundle.labels()[i]).collect();
    let model = fit_mahalanobis(train_features.view(), &train_labels, bundle.n_classes(), Ridge::default())?;
    score_mahalanobis(&model, features.view())
}

/// Every CSF the bundle has inputs for, in a fixed order.
pub fn available_csfs(bundle: &PredictionBundle) -> Vec<CsfId> {
    let mut out = vec![CsfId::Msr, CsfId::Pe, CsfId::Mls];
    if bundle.mcd_logits().is_some() {
        out.extend([CsfId::McdMsr, CsfId::McdPe, CsfId::McdEe, CsfId::McdMi, CsfId::McdMls]);
    }
    if bundle.features().is_some() {
        out.push(CsfId::Maha);
    }
    out.extend(bundle.external_scores().keys().map(|k| CsfId::External(k.clone())));
    out
}

/// Softmax probabilities for every row of the bundle's logits.
pub fn probabilities(bundle: &PredictionBundle, cfg: &SoftmaxConfig) -> Vec<Vec<f64>> {
    bundle
        .logits()
        .outer_iter()
        .map(|row| softmax(&row.to_vec(), cfg))
        .collect()
}

/// Element-wise mean of the MCD logits over passes, as an N × C matrix.
pub fn mean_mcd_logits(bundle: &PredictionBundle) -> Option<ndarray::Array2<f64>> {
    let stack = bundle.mcd_logits()?;
    let passes = stack.len_of(Axis(1)) as f64;
    let mut mean = stack.sum_axis(Axis(1));
    Zip::from(&mut mean).for_each(|v| *v /= passes);
    Some(mean)
}
