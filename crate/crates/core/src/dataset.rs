//! Tabular datasets, feature-wise transforms and class-proportional splits.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature matrix plus class labels.
///
/// Labels are stored as indices into `class_ids`, which keeps the class
/// inventory stable across train/test partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_ids: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from raw labels; classes are numbered in order of
    /// first appearance.
    pub fn from_labels<S: AsRef<str>>(features: Vec<Vec<f64>>, labels: &[S]) -> Result<Self> {
        let mut class_ids: Vec<String> = Vec::new();
        let mut idx = Vec::with_capacity(labels.len());
        for label in labels {
            let label = label.as_ref();
            let pos = match class_ids.iter().position(|c| c == label) {
                Some(p) => p,
                None => {
                    class_ids.push(label.to_string());
                    class_ids.len() - 1
                }
            };
            idx.push(pos);
        }
        Self::with_classes(features, idx, class_ids)
    }

    /// Builds a dataset with an explicit class inventory.
    pub fn with_classes(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_ids: Vec<String>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                got: labels.len(),
            });
        }
        if class_ids.len() < 2 {
            return Err(Error::TooFewClasses(class_ids.len()));
        }
        if features.len() < class_ids.len() {
            return Err(Error::InvalidParameter(format!(
                "{} observations cannot cover {} classes",
                features.len(),
                class_ids.len()
            )));
        }
        let n = features[0].len();
        for (i, row) in features.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "non-finite feature at row {}, column {}",
                    i + 1,
                    j + 1
                )));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_ids.len()) {
            return Err(Error::InvalidParameter(format!("label index {bad} out of range")));
        }
        Ok(Dataset {
            features,
            labels,
            class_ids,
        })
    }

    /// Number of observations `m`.
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Number of features `n`.
    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn n_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_ids(&self) -> &[String] {
        &self.class_ids
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_ids.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows with the given indices, same class inventory.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: rows.iter().map(|&i| self.features[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            class_ids: self.class_ids.clone(),
        }
    }

    /// Index of the class treated as positive in binary problems: the
    /// numerically largest id when every id parses as a number, else the
    /// first class.
    pub fn positive_class(&self) -> usize {
        let numeric: Option<Vec<f64>> = self
            .class_ids
            .iter()
            .map(|c| c.trim().parse::<f64>().ok())
            .collect();
        match numeric {
            Some(values) => {
                let mut best = 0;
                for (i, v) in values.iter().enumerate() {
                    if *v > values[best] {
                        best = i;
                    }
                }
                best
            }
            None => 0,
        }
    }

    /// Labels mapped to ±1 with `positive` as +1.
    pub fn signed_labels(&self, positive: usize) -> Vec<f64> {
        self.labels
            .iter()
            .map(|&l| if l == positive { 1.0 } else { -1.0 })
            .collect()
    }

    fn with_features(&self, features: Vec<Vec<f64>>) -> Dataset {
        Dataset {
            features,
            labels: self.labels.clone(),
            class_ids: self.class_ids.clone(),
        }
    }
}

/// Per-column mean and population standard deviation (divide by `m`).
pub fn column_mean_std<R: AsRef<[f64]>>(rows: &[R]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.first().map_or(0, |r| r.as_ref().len());
    let m = rows.len() as f64;
    let mut mean = vec![0.0; n];
    if rows.is_empty() {
        return (mean, vec![0.0; n]);
    }
    for row in rows {
        for (acc, v) in mean.iter_mut().zip(row.as_ref()) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= m;
    }
    let mut var = vec![0.0; n];
    for row in rows {
        for ((acc, v), mu) in var.iter_mut().zip(row.as_ref()).zip(&mean) {
            let d = v - mu;
            *acc += d * d;
        }
    }
    let std = var.into_iter().map(|v| (v / m).sqrt()).collect();
    (mean, std)
}

/// Where the label lives in a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
    Last,
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "last" => LabelColumn::Last,
            _ => match s.parse::<usize>() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(s.to_string()),
            },
        })
    }
}

/// Reads a comma-separated file. A header row is assumed when any
/// feature cell of the first row fails to parse as a number.
pub fn load_csv(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<Dataset> {
    load_csv_ignoring(path, label_column, &[])
}

/// Like [`load_csv`], additionally dropping the named columns (e.g. a
/// string identifier column). Requires a header row.
pub fn load_csv_ignoring(
    path: impl AsRef<Path>,
    label_column: &LabelColumn,
    ignore: &[String],
) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, label_column, ignore)
}

/// Reads a CSV file holding features only, e.g. new observations to
/// classify. The header rule of [`load_csv`] applies.
pub fn load_features_csv(path: impl AsRef<Path>, ignore: &[String]) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_table(&text, None, ignore)?.0)
}

pub(crate) fn parse_csv(text: &str, label_column: &LabelColumn, ignore: &[String]) -> Result<Dataset> {
    let (features, labels) = parse_table(text, Some(label_column), ignore)?;
    Dataset::from_labels(features, &labels)
}

fn parse_table(
    text: &str,
    label_column: Option<&LabelColumn>,
    ignore: &[String],
) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push(rec);
    }
    let Some(first) = records.first() else {
        return Err(Error::TooFewClasses(0));
    };
    let width = first.len();

    let header_names: Vec<String> = first.iter().map(str::to_string).collect();
    let resolve_name = |name: &str| header_names.iter().position(|h| h == name);

    let label_idx = match label_column {
        None => None,
        Some(LabelColumn::Index(i)) if *i < width => Some(*i),
        Some(LabelColumn::Index(i)) => return Err(Error::MissingLabelColumn(i.to_string())),
        Some(LabelColumn::Last) => Some(width - 1),
        Some(LabelColumn::Name(name)) => {
            Some(resolve_name(name).ok_or_else(|| Error::MissingLabelColumn(name.clone()))?)
        }
    };
    let mut skip = vec![false; width];
    if let Some(l) = label_idx {
        skip[l] = true;
    }
    for name in ignore {
        let j = resolve_name(name).ok_or_else(|| Error::MissingLabelColumn(name.clone()))?;
        skip[j] = true;
    }

    let has_header = matches!(label_column, Some(LabelColumn::Name(_)))
        || !ignore.is_empty()
        || first
            .iter()
            .enumerate()
            .any(|(j, cell)| !skip[j] && cell.parse::<f64>().is_err());

    let mut features = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for (r, rec) in records.iter().enumerate().skip(usize::from(has_header)) {
        let mut row = Vec::with_capacity(width);
        for (j, cell) in rec.iter().enumerate() {
            if Some(j) == label_idx {
                labels.push(cell.to_string());
            } else if !skip[j] {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => row.push(v),
                    _ => {
                        return Err(Error::NonNumeric {
                            row: r + 1,
                            column: j + 1,
                            value: cell.to_string(),
                        })
                    }
                }
            }
        }
        features.push(row);
    }
    if features.is_empty() {
        return Err(Error::TooFewClasses(0));
    }
    Ok((features, labels))
}

/// Feature-wise preprocessing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    None,
    MinMax,
    Standardize,
}

impl std::str::FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "-" => Ok(TransformKind::None),
            "minmax" | "min_max" | "min-max" => Ok(TransformKind::MinMax),
            "standardize" | "std" | "zscore" => Ok(TransformKind::Standardize),
            other => Err(Error::InvalidParameter(format!("unknown transform {other:?}"))),
        }
    }
}

impl std::fmt::Display for TransformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TransformKind::None => "none",
            TransformKind::MinMax => "minmax",
            TransformKind::Standardize => "standardize",
        })
    }
}

/// Fitted affine map `x -> (x - shift) / scale`, column by column.
/// A zero scale marks a constant column, which maps to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    pub kind: TransformKind,
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl TransformParams {
    pub fn identity(n: usize) -> Self {
        TransformParams {
            kind: TransformKind::None,
            shift: vec![0.0; n],
            scale: vec![1.0; n],
        }
    }

    pub fn fit(data: &Dataset, kind: TransformKind) -> Self {
        let n = data.n_features();
        match kind {
            TransformKind::None => Self::identity(n),
            TransformKind::MinMax => {
                let mut lo = vec![f64::INFINITY; n];
                let mut hi = vec![f64::NEG_INFINITY; n];
                for row in data.features() {
                    for j in 0..n {
                        lo[j] = lo[j].min(row[j]);
                        hi[j] = hi[j].max(row[j]);
                    }
                }
                let scale = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
                TransformParams {
                    kind,
                    shift: lo,
                    scale,
                }
            }
            TransformKind::Standardize => {
                let (mean, std) = column_mean_std(data.features());
                TransformParams {
                    kind,
                    shift: mean,
                    scale: std,
                }
            }
        }
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.shift.len() {
            return Err(Error::DimensionMismatch {
                expected: self.shift.len(),
                got: row.len(),
            });
        }
        if self.kind == TransformKind::None {
            return Ok(row.to_vec());
        }
        Ok(row
            .iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(&x, (&a, &b))| if b == 0.0 { 0.0 } else { (x - a) / b })
            .collect())
    }
}

/// Fits `kind` on `data` and returns the transformed copy with its parameters.
pub fn fit_transform(data: &Dataset, kind: TransformKind) -> (Dataset, TransformParams) {
    let params = TransformParams::fit(data, kind);
    let out = apply_transform(data, &params).expect("parameters fitted on the same data");
    (out, params)
}

/// Applies previously fitted parameters without refitting.
pub fn apply_transform(data: &Dataset, params: &TransformParams) -> Result<Dataset> {
    let features = data
        .features()
        .iter()
        .map(|row| params.apply_row(row))
        .collect::<Result<Vec<_>>>()?;
    Ok(data.with_features(features))
}

/// Proportional random sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Percentage of each class placed in the training partition.
    pub beta_percent: f64,
    pub seed: u64,
    pub repeats: usize,
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Per-class training counts for a split at `beta_percent`.
///
/// Each class gets `round_half_up(beta * count)`; the largest class (first
/// in class order on ties) then absorbs the difference to
/// `round_half_up(beta * m)`. Counts are clamped to `[1, count - 1]` so
/// both partitions see every class.
pub fn split_counts(class_counts: &[usize], beta_percent: f64) -> Vec<usize> {
    let beta = beta_percent / 100.0;
    let total: usize = class_counts.iter().sum();
    let mut counts: Vec<usize> = class_counts
        .iter()
        .map(|&c| round_half_up(beta * c as f64).clamp(1, c.saturating_sub(1).max(1)))
        .collect();
    let target = round_half_up(beta * total as f64) as i64;
    let diff = target - counts.iter().sum::<usize>() as i64;
    let largest = class_counts
        .iter()
        .enumerate()
        .fold(0, |best, (i, &c)| if c > class_counts[best] { i } else { best });
    let adjusted = counts[largest] as i64 + diff;
    let cap = class_counts[largest].saturating_sub(1).max(1) as i64;
    counts[largest] = adjusted.clamp(1, cap) as usize;
    counts
}

/// Splits `data` into train/test keeping class proportions.
///
/// Randomness: a ChaCha8 generator seeded with `spec.seed` and switched to
/// stream `repeat_index`; the members of each class (in class order,
/// ascending row index) are shuffled with Fisher-Yates (`rand` 0.8
/// `SliceRandom::shuffle`) and the first `split_counts` rows go to train.
/// Both partitions keep the original row order.
pub fn proportional_split(
    data: &Dataset,
    spec: &SplitSpec,
    repeat_index: u64,
) -> Result<(Dataset, Dataset)> {
    if !(spec.beta_percent > 0.0 && spec.beta_percent < 100.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must lie in (0, 100), got {}",
            spec.beta_percent
        )));
    }
    let class_counts = data.class_counts();
    for (k, &c) in class_counts.iter().enumerate() {
        if c < 2 {
            return Err(Error::ClassTooSmall(data.class_ids()[k].clone(), c));
        }
    }
    let train_counts = split_counts(&class_counts, spec.beta_percent);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(repeat_index);

    let mut in_train = vec![false; data.len()];
    for (k, &take) in train_counts.iter().enumerate() {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| data.labels()[i] == k).collect();
        members.shuffle(&mut rng);
        for &i in &members[..take] {
            in_train[i] = true;
        }
    }
    let train: Vec<usize> = (0..data.len()).filter(|&i| in_train[i]).collect();
    let test: Vec<usize> = (0..data.len()).filter(|&i| !in_train[i]).collect();
    Ok((data.subset(&train), data.subset(&test)))
}
