use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across loading, scoring, evaluation and risk control.
#[derive(Debug, Error)]
pub enum FdError {
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("shape mismatch in {file}{}: {detail}", row_suffix(*.row))]
    ShapeMismatch {
        file: String,
        row: Option<usize>,
        detail: String,
    },

    #[error("non-finite value in {file} at row {row}")]
    NonFiniteValue { file: String, row: usize },

    #[error("label {value} out of range in {file} at row {row}")]
    LabelOutOfRange {
        file: String,
        row: usize,
        value: i64,
    },

    #[error("label/shift mismatch at row {row}: {detail}")]
    LabelShiftMismatch { row: usize, detail: String },

    #[error("cannot parse {file} at row {row}: {detail}")]
    Parse {
        file: String,
        row: usize,
        detail: String,
    },

    #[error("new-class study has no new-class samples")]
    EmptyNewClassStudy,

    #[error("bundle has no MCD logit stack")]
    MissingMcdStack,

    #[error("bundle has no feature matrix")]
    MissingFeatures,

    #[error("unknown external score column `{0}`")]
    UnknownExternal(String),

    #[error("covariance is singular after ridge regularisation")]
    SingularCovariance,

    #[error("class {class} has {count} training rows, need at least 2")]
    ClassUnderpopulated { class: usize, count: usize },

    #[error("evaluation set is empty")]
    EmptyEvaluationSet,

    #[error("degenerate labels: {0}")]
    DegenerateLabels(&'static str),

    #[error("no threshold satisfies the requested risk bound")]
    NoFeasibleThreshold,

    #[error("Platt fit diverged (|a| = {0:.3e}); scores perfectly separate the labels")]
    PerfectSeparation(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid study `{name}`: {detail}")]
    InvalidStudy { name: String, detail: String },

    #[error("study `{study}`, csf `{csf}`: {source}")]
    Study {
        study: String,
        csf: String,
        #[source]
        source: Box<FdError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn row_suffix(row: Option<usize>) -> String {
    row.map(|r| format!(" at row {r}")).unwrap_or_default()
}

pub type Result<T, E = FdError> = std::result::Result<T, E>;
