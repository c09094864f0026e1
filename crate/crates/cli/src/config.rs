//! Run configuration: an optional JSON file merged with command-line flags,
//! with defaults filled in from the bundle.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use fdshift_core::metrics::EAurcMode;
use fdshift_core::risk_control::DEFAULT_BINS;
use fdshift_core::{available_csfs, default_studies, CsfId, EvalOptions, PredictionBundle, SoftmaxConfig, StudySpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Json,
    Csv,
    Svg,
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub bundle_path: Option<PathBuf>,
    pub studies: Option<Vec<StudySpec>>,
    pub csfs: Option<Vec<CsfId>>,
    pub softmax: Option<SoftmaxConfig>,
    pub output_dir: Option<PathBuf>,
    pub emit: Option<Vec<Emit>>,
    pub ece_bins: Option<usize>,
    pub e_aurc_mode: Option<EAurcMode>,
}

impl ConfigFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bundle_path: PathBuf,
    pub studies: Vec<StudySpec>,
    pub csfs: Vec<CsfId>,
    pub output_dir: PathBuf,
    pub emit: BTreeSet<Emit>,
    pub eval: EvalOptions,
}

impl RunConfig {
    /// Flags win over the file; lists left unset default to what the
    /// bundle supports.
    pub fn resolve(file: ConfigFile, flags: &crate::GlobalArgs, bundle: &PredictionBundle) -> Result<Self, CliError> {
        let mut softmax = file.softmax.unwrap_or_default();
        if let Some(p) = flags.precision {
            softmax.precision = p;
        }
        if let Some(t) = flags.temperature {
            softmax.temperature = t;
        }
        softmax.validate().map_err(|e| CliError::Config(e.to_string()))?;

        let studies = file.studies.unwrap_or_else(|| default_studies(bundle));
        if studies.is_empty() {
            return Err(CliError::Config("at least one study is required".into()));
        }
        for s in &studies {
            s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        let mut names = BTreeSet::new();
        if let Some(dup) = studies.iter().find(|s| !names.insert(s.name.as_str())) {
            return Err(CliError::Config(format!("duplicate study name `{}`", dup.name)));
        }
        let csfs = file.csfs.unwrap_or_else(|| available_csfs(bundle));
        if csfs.is_empty() {
            return Err(CliError::Config("at least one CSF is required".into()));
        }
        let ece_bins = file.ece_bins.unwrap_or(DEFAULT_BINS);
        if ece_bins == 0 {
            return Err(CliError::Config("ece_bins must be positive".into()));
        }
        let emit = file
            .emit
            .map(|e| e.into_iter().collect())
            .unwrap_or_else(|| [Emit::Json, Emit::Csv, Emit::Svg].into_iter().collect());

        Ok(RunConfig {
            bundle_path: flags.bundle.clone().or(file.bundle_path).unwrap_or_default(),
            studies,
            csfs,
            output_dir: flags.out.clone().or(file.output_dir).unwrap_or_else(|| PathBuf::from(".")),
            emit,
            eval: EvalOptions {
                softmax,
                ece_bins,
                e_aurc_mode: file.e_aurc_mode.unwrap_or_default(),
            },
        })
    }
}
