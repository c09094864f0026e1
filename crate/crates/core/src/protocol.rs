//! Studies: a subset of shift categories, a failure-label policy and a
//! metric battery, evaluated for a list of CSFs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bundle::{PredictionBundle, ShiftTag};
use crate::error::{FdError, Result};
use crate::failure::{failure_labels, FailureLabels, StudyKind};
use crate::metrics::{self, ApPositive, EAurcMode};
use crate::risk_control::{self, DEFAULT_BINS};
use crate::scores::{compute_csf, probabilities, ConfidenceVector, CsfId, SoftmaxConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricId {
    Aurc,
    EAurc,
    AurocF,
    ApF,
    ApFErr,
    AurocOut,
    Accuracy,
    Nll,
    Brier,
    Ece,
}

impl MetricId {
    pub const ALL: [MetricId; 10] = [
        MetricId::Aurc,
        MetricId::EAurc,
        MetricId::AurocF,
        MetricId::ApF,
        MetricId::ApFErr,
        MetricId::AurocOut,
        MetricId::Accuracy,
        MetricId::Nll,
        MetricId::Brier,
        MetricId::Ece,
    ];

    pub fn lower_is_better(self) -> bool {
        matches!(
            self,
            MetricId::Aurc | MetricId::EAurc | MetricId::Ece | MetricId::Nll | MetricId::Brier
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Aurc => "aurc",
            MetricId::EAurc => "e_aurc",
            MetricId::AurocF => "auroc_f",
            MetricId::ApF => "ap_f",
            MetricId::ApFErr => "ap_f_err",
            MetricId::AurocOut => "auroc_out",
            MetricId::Accuracy => "accuracy",
            MetricId::Nll => "nll",
            MetricId::Brier => "brier",
            MetricId::Ece => "ece",
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        MetricId::ALL
            .into_iter()
            .find(|m| m.as_str() == key)
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

impl Serialize for MetricId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for MetricId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub name: String,
    pub kind: StudyKind,
    pub shift_filter: Vec<ShiftTag>,
    pub metrics: Vec<MetricId>,
}

impl StudySpec {
    pub fn validate(&self) -> Result<()> {
        let invalid = |detail: &str| FdError::InvalidStudy {
            name: self.name.clone(),
            detail: detail.to_string(),
        };
        if self.name.trim().is_empty() {
            return Err(invalid("name is empty"));
        }
        if self.shift_filter.is_empty() {
            return Err(invalid("shift filter is empty"));
        }
        if self.metrics.is_empty() {
            return Err(invalid("no metrics requested"));
        }
        if self.kind == StudyKind::Newclass {
            if !self.shift_filter.contains(&ShiftTag::Iid) {
                return Err(invalid("new-class study must include IID samples"));
            }
            if !self.shift_filter.iter().any(|t| t.is_new_class()) {
                return Err(invalid("new-class study must include a NEWCLASS tag"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub softmax: SoftmaxConfig,
    pub ece_bins: usize,
    pub e_aurc_mode: EAurcMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            softmax: SoftmaxConfig::default(),
            ece_bins: DEFAULT_BINS,
            e_aurc_mode: EAurcMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MetricKey {
    pub study: String,
    pub csf: CsfId,
    pub metric: MetricId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudySize {
    /// Samples passing the shift filter.
    pub samples: usize,
    /// Samples left in the ranking evaluation after masking.
    pub evaluated: usize,
}

/// Metric values for (study, CSF, metric) triples. Metrics that are
/// undefined for the data (e.g. AUROC without failures) are listed in
/// `skipped` with the reason.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub values: BTreeMap<MetricKey, f64>,
    pub skipped: BTreeMap<MetricKey, String>,
    pub sizes: BTreeMap<String, StudySize>,
}

impl MetricReport {
    pub fn get(&self, study: &str, csf: &CsfId, metric: MetricId) -> Option<f64> {
        self.values
            .get(&MetricKey {
                study: study.to_string(),
                csf: csf.clone(),
                metric,
            })
            .copied()
    }

    /// Union of two reports; entries of `other` win on key collisions.
    pub fn merge(mut self, other: MetricReport) -> MetricReport {
        self.values.extend(other.values);
        self.skipped.extend(other.skipped);
        self.sizes.extend(other.sizes);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub csf: CsfId,
    pub value: f64,
    pub rank: usize,
}

/// Per (study, metric) column, CSFs ordered best first. Ties share the
/// lowest rank of the tie (1, 1, 3, ...).
pub fn rank_table(report: &MetricReport) -> BTreeMap<(String, MetricId), Vec<RankEntry>> {
    let mut columns: BTreeMap<(String, MetricId), Vec<(CsfId, f64)>> = BTreeMap::new();
    for (key, &value) in &report.values {
        columns
            .entry((key.study.clone(), key.metric))
            .or_default()
            .push((key.csf.clone(), value));
    }
    columns
        .into_iter()
        .map(|((study, metric), entries)| {
            let better = |a: f64, b: f64| if metric.lower_is_better() { a < b } else { a > b };
            let mut ranked: Vec<RankEntry> = entries
                .iter()
                .map(|(csf, v)| RankEntry {
                    csf: csf.clone(),
                    value: *v,
                    rank: 1 + entries.iter().filter(|(_, o)| better(*o, *v)).count(),
                })
                .collect();
            ranked.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.csf.cmp(&b.csf)));
            ((study, metric), ranked)
        })
        .collect()
}

fn undefined(err: &FdError) -> bool {
    matches!(
        err,
        FdError::DegenerateLabels(_) | FdError::PerfectSeparation(_) | FdError::EmptyEvaluationSet
    )
}

/// Restricts scores and labels to the evaluated samples.
fn masked(scores: &[f64], labels: &FailureLabels) -> (Vec<f64>, Vec<u8>) {
    scores
        .iter()
        .zip(&labels.residuals)
        .zip(&labels.eval_mask)
        .filter(|(_, &m)| m == 1)
        .map(|((&s, &r), _)| (s, r))
        .unzip()
}

/// ECE of a CSF. Scores outside [0, 1] are first mapped through a Platt
/// model fitted on the same evaluated samples.
pub fn csf_ece(scores: &[f64], labels: &FailureLabels, bins: usize) -> Result<f64> {
    let (scores, residuals) = masked(scores, labels);
    if scores.is_empty() {
        return Err(FdError::EmptyEvaluationSet);
    }
    let probs = if scores.iter().all(|s| (0.0..=1.0).contains(s)) {
        scores
    } else {
        let model = risk_control::platt_fit(&scores, &residuals)?;
        risk_control::platt_apply(&model, &scores)
    };
    risk_control::ece(&probs, &residuals, bins)
}

struct StudyData {
    indices: Vec<usize>,
    bundle: PredictionBundle,
    labels: FailureLabels,
}

impl StudyData {
    fn new(bundle: &PredictionBundle, spec: &StudySpec) -> Result<Self> {
        let indices: Vec<usize> = bundle
            .shift_tags()
            .iter()
            .enumerate()
            .filter(|(_, t)| spec.shift_filter.contains(t))
            .map(|(i, _)| i)
            .collect();
        if indices.is_empty() {
            return Err(FdError::InvalidStudy {
                name: spec.name.clone(),
                detail: "no samples match the shift filter".into(),
            });
        }
        let sub = bundle.select(&indices)?;
        let labels = failure_labels(&sub, spec.kind)?;
        Ok(StudyData {
            indices,
            bundle: sub,
            labels,
        })
    }
}

fn metric_value(
    metric: MetricId,
    scores: &[f64],
    data: &StudyData,
    opts: &EvalOptions,
) -> Result<f64> {
    let labels = &data.labels;
    match metric {
        MetricId::Aurc => Ok(metrics::rc_curve(scores, labels)?.aurc()),
        MetricId::EAurc => {
            let curve = metrics::rc_curve(scores, labels)?;
            metrics::e_aurc(&curve, labels, opts.e_aurc_mode)
        }
        MetricId::AurocF => metrics::auroc_f(scores, labels),
        MetricId::ApF => metrics::ap_f(scores, labels, ApPositive::Success),
        MetricId::ApFErr => metrics::ap_f(scores, labels, ApPositive::Failure),
        MetricId::AurocOut => {
            let outlier: Vec<u8> = data.bundle.shift_tags().iter().map(|t| t.is_new_class() as u8).collect();
            metrics::auroc_out(scores, &outlier)
        }
        MetricId::Accuracy => metrics::accuracy(&labels.residuals),
        MetricId::Nll | MetricId::Brier => {
            let probs = probabilities(&data.bundle, &opts.softmax);
            let ood = data.bundle.ood_class();
            let (p, y): (Vec<Vec<f64>>, Vec<usize>) = probs
                .into_iter()
                .zip(data.bundle.labels())
                .filter(|(_, &y)| y != ood)
                .map(|(p, &y)| (p, y))
                .unzip();
            if metric == MetricId::Nll {
                metrics::nll(&p, &y)
            } else {
                metrics::brier(&p, &y)
            }
        }
        MetricId::Ece => csf_ece(scores, labels, opts.ece_bins),
    }
}

/// Scores of one CSF restricted to a study, with the study's failure labels.
pub fn study_scores(
    bundle: &PredictionBundle,
    spec: &StudySpec,
    csf: &CsfId,
    cfg: &SoftmaxConfig,
) -> Result<(Vec<f64>, FailureLabels)> {
    spec.validate()?;
    let data = StudyData::new(bundle, spec)?;
    let full = compute_csf(bundle, csf, cfg)?;
    Ok((subset(&full, &data.indices), data.labels))
}

fn subset(full: &ConfidenceVector, indices: &[usize]) -> Vec<f64> {
    indices.iter().map(|&i| full.scores[i]).collect()
}

/// One study per shift category present in the bundle: IID, covariate and
/// subclass shifts as standard studies, and each new-class category paired
/// with the IID samples.
pub fn default_studies(bundle: &PredictionBundle) -> Vec<StudySpec> {
    let present = |t: ShiftTag| bundle.shift_tags().contains(&t);
    let has_iid = present(ShiftTag::Iid);
    let mut specs = Vec::new();
    for tag in ShiftTag::ALL.into_iter().filter(|&t| present(t)) {
        let (kind, filter) = if tag.is_new_class() {
            if !has_iid {
                continue;
            }
            (StudyKind::Newclass, vec![ShiftTag::Iid, tag])
        } else {
            (StudyKind::Standard, vec![tag])
        };
        let mut metrics: Vec<MetricId> = MetricId::ALL.to_vec();
        if kind == StudyKind::Standard {
            metrics.retain(|&m| m != MetricId::AurocOut);
        }
        specs.push(StudySpec {
            name: tag.as_str().to_ascii_lowercase(),
            kind,
            shift_filter: filter,
            metrics,
        });
    }
    specs
}

/// Evaluates every requested CSF on one study.
///
/// Accuracy always covers every sample in the study; ranking metrics use the
/// evaluation mask, so new-class studies drop misclassified IID samples from
/// ranking only.
pub fn run_study(
    bundle: &PredictionBundle,
    spec: &StudySpec,
    csfs: &[CsfId],
    opts: &EvalOptions,
) -> Result<MetricReport> {
    spec.validate()?;
    opts.softmax.validate()?;
    let data = StudyData::new(bundle, spec)?;
    let mut report = MetricReport::default();
    report.sizes.insert(
        spec.name.clone(),
        StudySize {
            samples: data.indices.len(),
            evaluated: data.labels.eval_count(),
        },
    );
    for csf in csfs {
        let annotate = |e: FdError| FdError::Study {
            study: spec.name.clone(),
            csf: csf.to_string(),
            source: Box::new(e),
        };
        let full = compute_csf(bundle, csf, &opts.softmax).map_err(annotate)?;
        let scores = subset(&full, &data.indices);
        for &metric in &spec.metrics {
            let key = MetricKey {
                study: spec.name.clone(),
                csf: csf.clone(),
                metric,
            };
            match metric_value(metric, &scores, &data, opts) {
                Ok(v) => {
                    report.values.insert(key, v);
                }
                Err(e) if undefined(&e) => {
                    report.skipped.insert(key, e.to_string());
                }
                Err(e) => return Err(annotate(e)),
            }
        }
    }
    Ok(report)
}

/// Runs several studies and merges their reports.
pub fn run_studies(
    bundle: &PredictionBundle,
    specs: &[StudySpec],
    csfs: &[CsfId],
    opts: &EvalOptions,
) -> Result<MetricReport> {
    specs.iter().try_fold(MetricReport::default(), |acc, spec| {
        Ok(acc.merge(run_study(bundle, spec, csfs, opts)?))
    })
}
