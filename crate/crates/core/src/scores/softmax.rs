//! Max-subtracted softmax evaluated at a chosen floating-point precision.
//!
//! Half precision is emulated: every elementary operation is carried out in
//! f64 and rounded to the nearest binary16 value (ties to even). Single and
//! double precision use native arithmetic.

use std::fmt;
use std::str::FromStr;

use half::f16;
use serde::{Deserialize, Serialize};

use crate::error::{FdError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F16,
    F32,
    F64,
}

impl Precision {
    pub const ALL: [Precision; 3] = [Precision::F16, Precision::F32, Precision::F64];

    /// Rounds an f64 to the nearest value representable at this precision.
    pub fn quantize(self, x: f64) -> f64 {
        match self {
            Precision::F16 => f16::from_f64(x).to_f64(),
            Precision::F32 => x as f32 as f64,
            Precision::F64 => x,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F16 => "f16",
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f16" | "16" | "half" => Ok(Precision::F16),
            "f32" | "32" | "single" => Ok(Precision::F32),
            "f64" | "64" | "double" => Ok(Precision::F64),
            other => Err(format!("unknown precision `{other}` (expected f16, f32 or f64)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxConfig {
    pub precision: Precision,
    /// Logits are divided by this before the softmax.
    pub temperature: f64,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        SoftmaxConfig {
            precision: Precision::F64,
            temperature: 1.0,
        }
    }
}

impl SoftmaxConfig {
    pub fn new(precision: Precision, temperature: f64) -> Result<Self> {
        let cfg = SoftmaxConfig { precision, temperature };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(FdError::InvalidParameter(format!(
                "temperature must be positive and finite, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Arithmetic at one precision. Values are loaded by rounding from f64.
trait Lane: Copy + PartialOrd {
    fn load(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn div(self, o: Self) -> Self;
    fn exp(self) -> Self;
}

impl Lane for f64 {
    fn load(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn div(self, o: Self) -> Self {
        self / o
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
}

impl Lane for f32 {
    fn load(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn div(self, o: Self) -> Self {
        self / o
    }
    fn exp(self) -> Self {
        f32::exp(self)
    }
}

/// binary16 value carried in an f64; every result is re-rounded.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct Half(f64);

impl Half {
    fn round(x: f64) -> Self {
        Half(f16::from_f64(x).to_f64())
    }
}

impl Lane for Half {
    fn load(x: f64) -> Self {
        Half::round(x)
    }
    fn to_f64(self) -> f64 {
        self.0
    }
    fn add(self, o: Self) -> Self {
        Half::round(self.0 + o.0)
    }
    fn sub(self, o: Self) -> Self {
        Half::round(self.0 - o.0)
    }
    fn div(self, o: Self) -> Self {
        Half::round(self.0 / o.0)
    }
    fn exp(self) -> Self {
        Half::round(self.0.exp())
    }
}

fn softmax_in<L: Lane>(logits: &[f64], temperature: f64) -> Vec<f64> {
    let t = L::load(temperature);
    let z: Vec<L> = logits.iter().map(|&x| L::load(x).div(t)).collect();
    let top = (1..z.len()).fold(0, |m, j| if z[j] > z[m] { j } else { m });
    let e: Vec<L> = z.iter().map(|&v| v.sub(z[top]).exp()).collect();
    // Tail first, then the max term (exactly 1), so whether the sum rounds
    // to 1 depends on the tail mass and not on where the max sits in the row.
    let tail = e
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != top)
        .fold(None, |acc: Option<L>, (_, &v)| Some(acc.map_or(v, |a| a.add(v))));
    let sum = tail.map_or(e[top], |t| t.add(e[top]));
    e.into_iter().map(|v| v.div(sum).to_f64()).collect()
}

/// Softmax of one logit row. Logits are rounded to the configured precision
/// on load, so a reduced precision models logits stored at that precision.
pub fn softmax(logits: &[f64], cfg: &SoftmaxConfig) -> Vec<f64> {
    assert!(!logits.is_empty(), "softmax of an empty row");
    match cfg.precision {
        Precision::F16 => softmax_in::<Half>(logits, cfg.temperature),
        Precision::F32 => softmax_in::<f32>(logits, cfg.temperature),
        Precision::F64 => softmax_in::<f64>(logits, cfg.temperature),
    }
}
