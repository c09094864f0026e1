//! Failure detection under distribution shift: prediction bundles,
//! confidence scoring functions, risk-coverage metrics, study protocol,
//! selective-risk control and a float-precision audit of the softmax.

pub mod bundle;
pub mod error;
pub mod failure;
pub mod metrics;
pub mod oracle;
pub mod precision_audit;
pub mod protocol;
pub mod risk_control;
pub mod scores;

pub use bundle::{load_bundle, save_bundle, BundleMeta, MatrixFormat, PredictionBundle, ShiftTag};
pub use error::{FdError, Result};
pub use failure::{argmax, failure_labels, FailureLabels, StudyKind};
pub use protocol::{
    default_studies, rank_table, run_studies, run_study, study_scores, EvalOptions, MetricId, MetricKey, MetricReport, RankEntry, StudySpec,
};
pub use scores::{available_csfs, compute_csf, ConfidenceVector, CsfId, Precision, SoftmaxConfig};
