//! Threshold selection with a risk guarantee, and confidence calibration.

mod ece;
mod platt;
mod sgr;

pub use ece::{bin_index, ece, DEFAULT_BINS};
pub use platt::{platt_apply, platt_fit, platt_fit_with, sigmoid, PlattModel, PlattOptions, SEPARATION_LIMIT};
pub use sgr::{binomial_log_cdf, binomial_upper_bound, selective_risk, sgr_select, SgrResult};
