//! Command-line front end: argument parsing, configuration and artifact
//! writing around `fdshift-core`.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;
pub mod synth;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fdshift_core::{CsfId, FdError, Precision};

use crate::config::Emit;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] FdError),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    /// 2 for bad configuration, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fdshift", version, about = "Evaluate failure detection of stored classifier outputs")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Prediction bundle directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub bundle: Option<PathBuf>,
    /// Output directory (default: current directory).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Softmax precision: f16, f32 or f64 (default f64).
    #[arg(long, global = true)]
    pub precision: Option<Precision>,
    /// Softmax temperature; logits are divided by it.
    #[arg(long, global = true, value_name = "R")]
    pub temperature: Option<f64>,
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AuditModeArg {
    Quantize,
    ComputeOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Very confident predictions that expose softmax rounding.
    Highconf,
    /// I.i.d. predictions with calibrated max-softmax confidence.
    Calibrated,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute CSF scores for every sample.
    Score {
        /// CSFs to compute, comma separated (default: all available).
        #[arg(long = "csf", value_delimiter = ',')]
        csfs: Vec<CsfId>,
    },
    /// Run every study and write the metric report.
    Evaluate {
        /// Artifacts to write, comma separated (default: json,csv,svg).
        #[arg(long, value_enum, value_delimiter = ',')]
        emit: Vec<Emit>,
    },
    /// Write the risk-coverage curve of one CSF on one study.
    RcCurve {
        #[arg(long, default_value = "msr")]
        csf: CsfId,
        /// Study name (default: the first configured study).
        #[arg(long)]
        study: Option<String>,
    },
    /// Pick a confidence threshold with a guaranteed selective risk.
    Sgr {
        #[arg(long, default_value_t = 0.15)]
        rstar: f64,
        #[arg(long, default_value_t = 0.001)]
        delta: f64,
        #[arg(long, default_value = "msr")]
        csf: CsfId,
        /// Second bundle on which to measure the selected threshold.
        #[arg(long, value_name = "DIR")]
        holdout: Option<PathBuf>,
    },
    /// Expected calibration error before and after Platt scaling.
    Calibrate {
        #[arg(long, default_value = "msr")]
        csf: CsfId,
        #[arg(long, default_value_t = fdshift_core::risk_control::DEFAULT_BINS)]
        bins: usize,
        /// Use prior-corrected Platt targets.
        #[arg(long)]
        platt_smoothing: bool,
    },
    /// Round-to-one error rates and ranking metrics at each float precision.
    PrecisionAudit {
        #[arg(long, value_delimiter = ',', default_value = "f16,f32,f64")]
        precisions: Vec<Precision>,
        #[arg(long, value_enum, default_value = "quantize")]
        mode: AuditModeArg,
    },
    /// Compare metric implementations against brute-force references.
    Verify,
    /// Write a synthetic bundle to --out (seed from FDSHIFT_SEED).
    Synth {
        #[arg(value_enum)]
        kind: SynthKind,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        c: usize,
        #[arg(long, default_value_t = 0.3)]
        failure_rate: f64,
        #[arg(long, default_value_t = 20.0)]
        gap_low: f64,
        #[arg(long, default_value_t = 40.0)]
        gap_high: f64,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    commands::dispatch(&cli.global, cli.command)
}
