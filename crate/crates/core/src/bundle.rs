//! Prediction bundles: stored classifier outputs for one evaluation run.
//!
//! A bundle directory holds `meta.json` plus headerless CSV files (or the
//! raw `.f64` variant for numeric matrices):
//!
//! | file                  | shape        |
//! |-----------------------|--------------|
//! | `logits`              | N × C        |
//! | `labels.csv`          | N × 1        |
//! | `shift.csv`           | N × 1        |
//! | `mcd_logits`          | N·T × C      |
//! | `features`            | N × D        |
//! | `external_<name>`     | N × 1        |

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array2, Array3, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{FdError, Result};

/// Magic bytes of the raw binary matrix format.
pub const BINARY_MAGIC: &[u8; 4] = b"FDSB";

/// Distribution-shift category of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ShiftTag {
    #[serde(rename = "IID")]
    Iid,
    #[serde(rename = "COVARIATE")]
    Covariate,
    #[serde(rename = "SUBCLASS")]
    Subclass,
    #[serde(rename = "NEWCLASS_SEMANTIC")]
    NewClassSemantic,
    #[serde(rename = "NEWCLASS_NONSEMANTIC")]
    NewClassNonSemantic,
}

impl ShiftTag {
    pub const ALL: [ShiftTag; 5] = [
        ShiftTag::Iid,
        ShiftTag::Covariate,
        ShiftTag::Subclass,
        ShiftTag::NewClassSemantic,
        ShiftTag::NewClassNonSemantic,
    ];

    pub fn is_new_class(self) -> bool {
        matches!(self, ShiftTag::NewClassSemantic | ShiftTag::NewClassNonSemantic)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ShiftTag::Iid => "IID",
            ShiftTag::Covariate => "COVARIATE",
            ShiftTag::Subclass => "SUBCLASS",
            ShiftTag::NewClassSemantic => "NEWCLASS_SEMANTIC",
            ShiftTag::NewClassNonSemantic => "NEWCLASS_NONSEMANTIC",
        }
    }
}

impl fmt::Display for ShiftTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShiftTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ShiftTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown shift tag `{s}`"))
    }
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub n: usize,
    pub c: usize,
    #[serde(default)]
    pub t: usize,
    #[serde(default)]
    pub d: usize,
    #[serde(default)]
    pub external: Vec<String>,
}

/// Encoding used for numeric matrices when writing a bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

/// Validated classifier outputs for N samples over C classes.
///
/// Labels use `C` as the sentinel for new-class samples; see
/// [`PredictionBundle::ood_class`].
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBundle {
    logits: Array2<f64>,
    labels: Vec<usize>,
    mcd_logits: Option<Array3<f64>>,
    features: Option<Array2<f64>>,
    shift_tags: Vec<ShiftTag>,
    external_scores: BTreeMap<String, Vec<f64>>,
}

impl PredictionBundle {
    pub fn new(
        logits: Array2<f64>,
        labels: Vec<usize>,
        shift_tags: Vec<ShiftTag>,
    ) -> Result<Self> {
        let bundle = PredictionBundle {
            logits,
            labels,
            mcd_logits: None,
            features: None,
            shift_tags,
            external_scores: BTreeMap::new(),
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn with_mcd_logits(mut self, mcd: Array3<f64>) -> Result<Self> {
        self.mcd_logits = Some(mcd);
        self.validate()?;
        Ok(self)
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        self.features = Some(features);
        self.validate()?;
        Ok(self)
    }

    pub fn with_external(mut self, name: impl Into<String>, scores: Vec<f64>) -> Result<Self> {
        self.external_scores.insert(name.into(), scores);
        self.validate()?;
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.logits.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.logits.ncols()
    }

    /// Sentinel label carried by new-class samples (equal to C).
    pub fn ood_class(&self) -> usize {
        self.n_classes()
    }

    pub fn logits(&self) -> &Array2<f64> {
        &self.logits
    }

    pub fn logit_row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.logits.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn shift_tags(&self) -> &[ShiftTag] {
        &self.shift_tags
    }

    /// MCD stack with axes (sample, pass, class).
    pub fn mcd_logits(&self) -> Option<&Array3<f64>> {
        self.mcd_logits.as_ref()
    }

    pub fn features(&self) -> Option<&Array2<f64>> {
        self.features.as_ref()
    }

    pub fn external_scores(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.external_scores
    }

    pub fn meta(&self) -> BundleMeta {
        BundleMeta {
            n: self.n_samples(),
            c: self.n_classes(),
            t: self.mcd_logits.as_ref().map_or(0, |m| m.len_of(Axis(1))),
            d: self.features.as_ref().map_or(0, |f| f.ncols()),
            external: self.external_scores.keys().cloned().collect(),
        }
    }

    /// Restricts the bundle to the given sample indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let bundle = PredictionBundle {
            logits: self.logits.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            mcd_logits: self.mcd_logits.as_ref().map(|m| m.select(Axis(0), indices)),
            features: self.features.as_ref().map(|f| f.select(Axis(0), indices)),
            shift_tags: indices.iter().map(|&i| self.shift_tags[i]).collect(),
            external_scores: self
                .external_scores
                .iter()
                .map(|(k, v)| (k.clone(), indices.iter().map(|&i| v[i]).collect()))
                .collect(),
        };
        bundle.validate()?;
        Ok(bundle)
    }

    fn validate(&self) -> Result<()> {
        let n = self.logits.nrows();
        let c = self.logits.ncols();
        if n == 0 {
            return Err(shape("logits", None, "bundle needs at least one sample"));
        }
        if c < 2 {
            return Err(shape("logits", None, format!("need at least 2 classes, got {c}")));
        }
        check_finite_rows("logits", &self.logits)?;
        if self.labels.len() != n {
            return Err(shape("labels", None, format!("expected {n} labels, got {}", self.labels.len())));
        }
        if self.shift_tags.len() != n {
            return Err(shape("shift", None, format!("expected {n} tags, got {}", self.shift_tags.len())));
        }
        for (row, (&label, &tag)) in self.labels.iter().zip(&self.shift_tags).enumerate() {
            if label > c {
                return Err(FdError::LabelOutOfRange {
                    file: "labels".into(),
                    row: row + 1,
                    value: label as i64,
                });
            }
            if (label == c) != tag.is_new_class() {
                return Err(FdError::LabelShiftMismatch {
                    row: row + 1,
                    detail: format!("label {label} with shift tag {tag} (new-class sentinel is {c})"),
                });
            }
        }
        if let Some(mcd) = &self.mcd_logits {
            let (mn, t, mc) = mcd.dim();
            if mn != n || mc != c || t == 0 {
                return Err(shape(
                    "mcd_logits",
                    None,
                    format!("expected {n} × T × {c} with T ≥ 1, got {mn} × {t} × {mc}"),
                ));
            }
            for (i, sample) in mcd.outer_iter().enumerate() {
                for (p, pass) in sample.outer_iter().enumerate() {
                    if pass.iter().any(|v| !v.is_finite()) {
                        return Err(FdError::NonFiniteValue {
                            file: "mcd_logits".into(),
                            row: i * t + p + 1,
                        });
                    }
                }
            }
        }
        if let Some(features) = &self.features {
            if features.nrows() != n || features.ncols() == 0 {
                return Err(shape(
                    "features",
                    None,
                    format!("expected {n} × D rows, got {} × {}", features.nrows(), features.ncols()),
                ));
            }
            check_finite_rows("features", features)?;
        }
        for (name, scores) in &self.external_scores {
            let file = format!("external_{name}");
            if scores.len() != n {
                return Err(shape(&file, None, format!("expected {n} scores, got {}", scores.len())));
            }
            if let Some(row) = scores.iter().position(|s| !s.is_finite()) {
                return Err(FdError::NonFiniteValue { file, row: row + 1 });
            }
        }
        Ok(())
    }
}

fn shape(file: &str, row: Option<usize>, detail: impl Into<String>) -> FdError {
    FdError::ShapeMismatch {
        file: file.to_string(),
        row,
        detail: detail.into(),
    }
}

fn check_finite_rows(file: &str, m: &Array2<f64>) -> Result<()> {
    for (i, row) in m.outer_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(FdError::NonFiniteValue {
                file: file.to_string(),
                row: i + 1,
            });
        }
    }
    Ok(())
}

/// Loads and validates a bundle directory.
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<PredictionBundle> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    if !meta_path.is_file() {
        return Err(FdError::MissingFile(meta_path));
    }
    let meta: BundleMeta = serde_json::from_slice(&fs::read(&meta_path)?)?;

    let logits = read_matrix(dir, "logits", meta.n, Some(meta.c))?;
    let labels = read_labels(dir, meta.n, meta.c)?;
    let shift_tags = read_shift(dir, meta.n)?;

    let mut bundle = PredictionBundle {
        logits,
        labels,
        mcd_logits: None,
        features: None,
        shift_tags,
        external_scores: BTreeMap::new(),
    };
    if meta.t > 0 {
        let flat = read_matrix(dir, "mcd_logits", meta.n * meta.t, Some(meta.c))?;
        let stack = flat
            .into_shape_with_order((meta.n, meta.t, meta.c))
            .map_err(|e| shape("mcd_logits", None, e.to_string()))?;
        bundle.mcd_logits = Some(stack);
    }
    if meta.d > 0 {
        bundle.features = Some(read_matrix(dir, "features", meta.n, Some(meta.d))?);
    }
    for name in &meta.external {
        let col = read_matrix(dir, &format!("external_{name}"), meta.n, Some(1))?;
        bundle.external_scores.insert(name.clone(), col.into_raw_vec_and_offset().0);
    }
    bundle.validate()?;
    Ok(bundle)
}

/// Writes a bundle directory that [`load_bundle`] reads back unchanged.
pub fn save_bundle(bundle: &PredictionBundle, dir: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let meta = bundle.meta();
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;

    write_matrix(dir, "logits", &bundle.logits, format)?;
    let labels: String = bundle.labels.iter().map(|l| format!("{l}\n")).collect();
    fs::write(dir.join("labels.csv"), labels)?;
    let tags: String = bundle.shift_tags.iter().map(|t| format!("{t}\n")).collect();
    fs::write(dir.join("shift.csv"), tags)?;

    if let Some(mcd) = &bundle.mcd_logits {
        let (n, t, c) = mcd.dim();
        let flat = mcd
            .to_owned()
            .into_shape_with_order((n * t, c))
            .map_err(|e| shape("mcd_logits", None, e.to_string()))?;
        write_matrix(dir, "mcd_logits", &flat, format)?;
    }
    if let Some(features) = &bundle.features {
        write_matrix(dir, "features", features, format)?;
    }
    for (name, scores) in &bundle.external_scores {
        let col = Array2::from_shape_vec((scores.len(), 1), scores.clone())
            .map_err(|e| shape(name, None, e.to_string()))?;
        write_matrix(dir, &format!("external_{name}"), &col, format)?;
    }
    Ok(())
}

fn matrix_path(dir: &Path, stem: &str) -> Result<(PathBuf, MatrixFormat)> {
    let csv = dir.join(format!("{stem}.csv"));
    if csv.is_file() {
        return Ok((csv, MatrixFormat::Csv));
    }
    let bin = dir.join(format!("{stem}.f64"));
    if bin.is_file() {
        return Ok((bin, MatrixFormat::Binary));
    }
    Err(FdError::MissingFile(csv))
}

fn read_matrix(dir: &Path, stem: &str, rows: usize, cols: Option<usize>) -> Result<Array2<f64>> {
    let (path, format) = matrix_path(dir, stem)?;
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let m = match format {
        MatrixFormat::Csv => read_csv_matrix(&path, &file)?,
        MatrixFormat::Binary => read_binary_matrix(&path, &file)?,
    };
    if m.nrows() != rows {
        return Err(shape(&file, None, format!("expected {rows} rows, got {}", m.nrows())));
    }
    if let Some(cols) = cols {
        if m.ncols() != cols {
            return Err(shape(&file, Some(1), format!("expected {cols} columns, got {}", m.ncols())));
        }
    }
    check_finite_rows(&file, &m)?;
    Ok(m)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path)?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn read_csv_matrix(path: &Path, file: &str) -> Result<Array2<f64>> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, record) in csv_reader(path)?.records().enumerate() {
        let record = record.map_err(|e| FdError::Parse {
            file: file.to_string(),
            row: i + 1,
            detail: e.to_string(),
        })?;
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(shape(file, Some(i + 1), format!("expected {c} columns, got {}", record.len())));
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| FdError::Parse {
                file: file.to_string(),
                row: i + 1,
                detail: format!("not a number: `{field}`"),
            })?;
            if !v.is_finite() {
                return Err(FdError::NonFiniteValue {
                    file: file.to_string(),
                    row: i + 1,
                });
            }
            data.push(v);
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols.unwrap_or(0)), data).map_err(|e| shape(file, None, e.to_string()))
}

fn read_binary_matrix(path: &Path, file: &str) -> Result<Array2<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..4] != BINARY_MAGIC {
        return Err(shape(file, None, "missing FDSB header"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice")) as usize;
    let (rows, cols) = (word(4), word(8));
    let body = &bytes[16..];
    if body.len() != rows * cols * 8 {
        return Err(shape(
            file,
            None,
            format!("header declares {rows} × {cols} values, payload holds {} bytes", body.len()),
        ));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| shape(file, None, e.to_string()))
}

fn write_matrix(dir: &Path, stem: &str, m: &Array2<f64>, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Csv => {
            let mut w = BufWriter::new(fs::File::create(dir.join(format!("{stem}.csv")))?);
            for row in m.outer_iter() {
                let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                writeln!(w, "{}", line.join(","))?;
            }
            w.flush()?;
        }
        MatrixFormat::Binary => {
            let mut w = BufWriter::new(fs::File::create(dir.join(format!("{stem}.f64")))?);
            w.write_all(BINARY_MAGIC)?;
            w.write_all(&(m.nrows() as u32).to_le_bytes())?;
            w.write_all(&(m.ncols() as u32).to_le_bytes())?;
            w.write_all(&0u32.to_le_bytes())?;
            for v in m.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn read_labels(dir: &Path, n: usize, c: usize) -> Result<Vec<usize>> {
    let path = dir.join("labels.csv");
    if !path.is_file() {
        return Err(FdError::MissingFile(path));
    }
    let mut labels = Vec::with_capacity(n);
    for (i, record) in csv_reader(&path)?.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| FdError::Parse {
            file: "labels.csv".into(),
            row,
            detail: e.to_string(),
        })?;
        if record.len() != 1 {
            return Err(shape("labels.csv", Some(row), format!("expected 1 column, got {}", record.len())));
        }
        let value: i64 = record[0].parse().map_err(|_| FdError::Parse {
            file: "labels.csv".into(),
            row,
            detail: format!("not an integer: `{}`", &record[0]),
        })?;
        if value < 0 || value as u64 > c as u64 {
            return Err(FdError::LabelOutOfRange {
                file: "labels.csv".into(),
                row,
                value,
            });
        }
        labels.push(value as usize);
    }
    if labels.len() != n {
        return Err(shape("labels.csv", None, format!("expected {n} rows, got {}", labels.len())));
    }
    Ok(labels)
}

fn read_shift(dir: &Path, n: usize) -> Result<Vec<ShiftTag>> {
    let path = dir.join("shift.csv");
    if !path.is_file() {
        return Err(FdError::MissingFile(path));
    }
    let mut tags = Vec::with_capacity(n);
    for (i, record) in csv_reader(&path)?.records().enumerate() {
        let record = record.map_err(|e| FdError::Parse {
            file: "shift.csv".into(),
            row: i + 1,
            detail: e.to_string(),
        })?;
        let tag = record
            .get(0)
            .unwrap_or_default()
            .parse()
            .map_err(|detail| FdError::Parse {
                file: "shift.csv".into(),
                row: i + 1,
                detail,
            })?;
        tags.push(tag);
    }
    if tags.len() != n {
        return Err(shape("shift.csv", None, format!("expected {n} rows, got {}", tags.len())));
    }
    Ok(tags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny() -> PredictionBundle {
        PredictionBundle::new(
            array![[2.0, 1.0, 0.0], [0.0, 3.0, 1.0], [1.0, 1.0, 1.0]],
            vec![0, 2, 3],
            vec![ShiftTag::Iid, ShiftTag::Covariate, ShiftTag::NewClassSemantic],
        )
        .unwrap()
    }

    #[test]
    fn rejects_nan_logits() {
        let err = PredictionBundle::new(array![[0.0, f64::NAN]], vec![0], vec![ShiftTag::Iid]).unwrap_err();
        assert!(matches!(err, FdError::NonFiniteValue { row: 1, .. }));
    }

    #[test]
    fn sentinel_label_requires_new_class_tag() {
        let err = PredictionBundle::new(array![[0.0, 1.0]], vec![2], vec![ShiftTag::Iid]).unwrap_err();
        assert!(matches!(err, FdError::LabelShiftMismatch { row: 1, .. }));
        let err = PredictionBundle::new(array![[0.0, 1.0]], vec![1], vec![ShiftTag::NewClassSemantic]).unwrap_err();
        assert!(matches!(err, FdError::LabelShiftMismatch { .. }));
    }

    #[test]
    fn single_class_rejected() {
        assert!(PredictionBundle::new(array![[0.0]], vec![0], vec![ShiftTag::Iid]).is_err());
    }

    #[test]
    fn shift_tags_parse_case_insensitively() {
        assert_eq!("newclass_semantic".parse::<ShiftTag>().unwrap(), ShiftTag::NewClassSemantic);
        assert!("OOD".parse::<ShiftTag>().is_err());
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let bundle = tiny()
            .with_mcd_logits(Array3::from_shape_fn((3, 2, 3), |(i, t, c)| (i * 7 + t * 3 + c) as f64 * 0.1))
            .unwrap()
            .with_features(array![[0.5, -1.0], [1.5, 2.0], [0.0, 0.25]])
            .unwrap()
            .with_external("confidnet", vec![0.1, 0.2, 0.3])
            .unwrap();
        for format in [MatrixFormat::Csv, MatrixFormat::Binary] {
            let dir = tempfile::tempdir().unwrap();
            save_bundle(&bundle, dir.path(), format).unwrap();
            assert_eq!(load_bundle(dir.path()).unwrap(), bundle);
        }
    }

    #[test]
    fn binary_header_checked() {
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&tiny(), dir.path(), MatrixFormat::Binary).unwrap();
        let path = dir.path().join("logits.f64");
        let mut bytes = fs::read(&path).unwrap();
        bytes.pop();
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(FdError::ShapeMismatch { .. })));
    }

    #[test]
    fn select_keeps_columns_aligned() {
        let sub = tiny().with_external("x", vec![1.0, 2.0, 3.0]).unwrap().select(&[2, 0]).unwrap();
        assert_eq!(sub.labels(), &[3, 0]);
        assert_eq!(sub.external_scores()["x"], vec![3.0, 1.0]);
        assert_eq!(sub.logit_row(1).to_vec(), vec![2.0, 1.0, 0.0]);
    }
}
