//! Tabular data containers: typed columns, reference vectors, splits.
//!
//! A [`Dataset`] is immutable once constructed and assumes cleaned input:
//! missing values are a hard error at load time, never imputed. Categorical
//! columns are integer-coded in first-appearance order and each original
//! column stays a single game player downstream (no one-hot expansion).

mod csv_io;

pub use csv_io::{load_csv, load_csv_reader, write_csv, write_csv_writer, KindHint};


use rand::seq::SliceRandom;
use thiserror::Error;

use crate::rng::stream_rng;

/// Prediction task attached to a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Regression,
    Binclass,
    Multiclass,
}

impl TaskKind {
    pub fn is_classification(self) -> bool {
        !matches!(self, TaskKind::Regression)
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskKind::Regression => write!(f, "regression"),
            TaskKind::Binclass => write!(f, "binclass"),
            TaskKind::Multiclass => write!(f, "multiclass"),
        }
    }
}

/// Column payload. Categorical columns keep their level strings so a dataset
/// written back to CSV reloads with identical codes.
#[derive(Debug, Clone)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical { levels: Vec<String>, codes: Vec<u32> },
}

/// One feature column.
#[derive(Debug, Clone)]
pub struct FeatureColumn {
    pub name: String,
    pub data: ColumnData,
}

impl FeatureColumn {
    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.data, ColumnData::Categorical { .. })
    }

    pub fn cardinality(&self) -> Option<usize> {
        match &self.data {
            ColumnData::Numeric(_) => None,
            ColumnData::Categorical { levels, .. } => Some(levels.len()),
        }
    }

    /// Cell value as a real number; categorical cells yield their code.
    pub fn value(&self, row: usize) -> f64 {
        match &self.data {
            ColumnData::Numeric(v) => v[row],
            ColumnData::Categorical { codes, .. } => codes[row] as f64,
        }
    }
}

/// Target column; classification targets hold integer class labels as reals.
#[derive(Debug, Clone)]
pub struct TargetColumn {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing value at row {row}, column {col:?}")]
    MissingValue { row: usize, col: String },
    #[error("unparsable cell at row {row}, column {col:?}: {detail}")]
    UnparsableCell { row: usize, col: String, detail: String },
    #[error("target column {0:?} not found")]
    TargetNotFound(String),
    #[error("empty file: no data rows")]
    EmptyFile,
    #[error("invalid target at row {row}: {detail}")]
    InvalidTarget { row: usize, detail: String },
    #[error("malformed csv at row {row}: {detail}")]
    Malformed { row: usize, detail: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("split would leave {part} empty although its fraction is positive")]
    FractionTooSmall { part: &'static str },
    #[error("invalid split spec: {0}")]
    InvalidSplitSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Immutable observation table with a typed target.
#[derive(Debug, Clone)]
pub struct Dataset {
    columns: Vec<FeatureColumn>,
    target: TargetColumn,
    task: TaskKind,
    /// Number of classes for classification tasks (0 for regression). Fixed
    /// at construction so split subsets keep the label space of the parent.
    n_classes: usize,
}

impl Dataset {
    /// Validates all invariants: equal column lengths, n ≥ 1, M ≥ 1, finite
    /// numerics, in-range codes, and task-consistent target labels.
    pub fn new(
        columns: Vec<FeatureColumn>,
        target: TargetColumn,
        task: TaskKind,
    ) -> Result<Self, DatasetError> {
        let n_classes = infer_n_classes(&target.values, task)?;
        let ds = Dataset { columns, target, task, n_classes };
        ds.validate()?;
        Ok(ds)
    }

    /// Like [`Dataset::new`] but with an explicit class count, used when
    /// carving subsets that may not contain every class.
    fn with_classes(
        columns: Vec<FeatureColumn>,
        target: TargetColumn,
        task: TaskKind,
        n_classes: usize,
    ) -> Result<Self, DatasetError> {
        let ds = Dataset { columns, target, task, n_classes };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let n = self.target.values.len();
        if n == 0 {
            return Err(DatasetError::Invalid("dataset has no rows".into()));
        }
        if self.columns.is_empty() {
            return Err(DatasetError::Invalid("dataset has no feature columns".into()));
        }
        for col in &self.columns {
            if col.len() != n {
                return Err(DatasetError::Invalid(format!(
                    "column {:?} has {} entries, expected {}",
                    col.name,
                    col.len(),
                    n
                )));
            }
            match &col.data {
                ColumnData::Numeric(v) => {
                    if let Some(bad) = v.iter().position(|x| !x.is_finite()) {
                        return Err(DatasetError::Invalid(format!(
                            "non-finite value in column {:?} at row {}",
                            col.name, bad
                        )));
                    }
                }
                ColumnData::Categorical { levels, codes } => {
                    if let Some(bad) = codes.iter().position(|&c| c as usize >= levels.len()) {
                        return Err(DatasetError::Invalid(format!(
                            "out-of-range code in column {:?} at row {}",
                            col.name, bad
                        )));
                    }
                }
            }
        }
        match self.task {
            TaskKind::Regression => {
                if let Some(bad) = self.target.values.iter().position(|y| !y.is_finite()) {
                    return Err(DatasetError::InvalidTarget {
                        row: bad,
                        detail: "non-finite regression target".into(),
                    });
                }
            }
            TaskKind::Binclass | TaskKind::Multiclass => {
                for (row, &y) in self.target.values.iter().enumerate() {
                    if !y.is_finite() || y.fract() != 0.0 || y < 0.0 || y >= self.n_classes as f64 {
                        return Err(DatasetError::InvalidTarget {
                            row,
                            detail: format!(
                                "label {} outside 0..{}",
                                y, self.n_classes
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.target.values.len()
    }

    /// Number of feature columns (players in the game).
    pub fn m(&self) -> usize {
        self.columns.len()
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    /// Classes in the label space; 0 for regression.
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn columns(&self) -> &[FeatureColumn] {
        &self.columns
    }

    pub fn target(&self) -> &TargetColumn {
        &self.target
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    /// Observation row as reals (categorical cells are their codes).
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c.value(i)).collect()
    }

    /// All rows as an n×M real matrix.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.row(i)).collect()
    }

    /// Rows restricted to masked-in features, in feature order.
    pub fn rows_masked(&self, mask: &[bool]) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| {
                self.columns
                    .iter()
                    .zip(mask)
                    .filter(|(_, &keep)| keep)
                    .map(|(c, _)| c.value(i))
                    .collect()
            })
            .collect()
    }

    /// Subset of rows, in the given index order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, DatasetError> {
        let columns = self
            .columns
            .iter()
            .map(|col| FeatureColumn {
                name: col.name.clone(),
                data: match &col.data {
                    ColumnData::Numeric(v) => {
                        ColumnData::Numeric(indices.iter().map(|&i| v[i]).collect())
                    }
                    ColumnData::Categorical { levels, codes } => ColumnData::Categorical {
                        levels: levels.clone(),
                        codes: indices.iter().map(|&i| codes[i]).collect(),
                    },
                },
            })
            .collect();
        let target = TargetColumn {
            name: self.target.name.clone(),
            values: indices.iter().map(|&i| self.target.values[i]).collect(),
        };
        Dataset::with_classes(columns, target, self.task, self.n_classes)
    }
}

fn infer_n_classes(values: &[f64], task: TaskKind) -> Result<usize, DatasetError> {
    match task {
        TaskKind::Regression => Ok(0),
        TaskKind::Binclass => {
            for (row, &y) in values.iter().enumerate() {
                if y != 0.0 && y != 1.0 {
                    return Err(DatasetError::InvalidTarget {
                        row,
                        detail: format!("binclass label must be 0 or 1, got {y}"),
                    });
                }
            }
            Ok(2)
        }
        TaskKind::Multiclass => {
            let mut max = 0u32;
            for (row, &y) in values.iter().enumerate() {
                if !y.is_finite() || y.fract() != 0.0 || y < 0.0 {
                    return Err(DatasetError::InvalidTarget {
                        row,
                        detail: format!("multiclass label must be a non-negative integer, got {y}"),
                    });
                }
                max = max.max(y as u32);
            }
            let k = max as usize + 1;
            if k < 3 {
                return Err(DatasetError::InvalidTarget {
                    row: 0,
                    detail: format!("multiclass needs K >= 3 classes, inferred K = {k}"),
                });
            }
            Ok(k)
        }
    }
}

/// Strategy for numeric reference values; categoricals always use the mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NumericStrategy {
    Mean,
    Median,
}

/// Per-feature statistic tag recorded in a [`ReferenceVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RefStrategy {
    Mean,
    Median,
    Mode,
}

/// Per-feature fallback values standing in for "absent" features when hybrid
/// inputs are built.
#[derive(Debug, Clone)]
pub struct ReferenceVector {
    pub values: Vec<f64>,
    pub strategy: Vec<RefStrategy>,
}

/// Reference statistic per feature: the chosen strategy for numeric columns,
/// mode for categorical columns (ties break toward the smallest code).
pub fn compute_reference_vector(d: &Dataset, numeric_strategy: NumericStrategy) -> ReferenceVector {
    let mut values = Vec::with_capacity(d.m());
    let mut strategy = Vec::with_capacity(d.m());
    for col in d.columns() {
        match &col.data {
            ColumnData::Numeric(v) => {
                let r = match numeric_strategy {
                    NumericStrategy::Mean => v.iter().sum::<f64>() / v.len() as f64,
                    NumericStrategy::Median => median(v),
                };
                values.push(r);
                strategy.push(match numeric_strategy {
                    NumericStrategy::Mean => RefStrategy::Mean,
                    NumericStrategy::Median => RefStrategy::Median,
                });
            }
            ColumnData::Categorical { levels, codes } => {
                let mut counts = vec![0usize; levels.len()];
                for &c in codes {
                    counts[c as usize] += 1;
                }
                // max_by_key keeps the last max, so scan manually for the
                // smallest code among ties.
                let mut best = 0usize;
                for (code, &cnt) in counts.iter().enumerate() {
                    if cnt > counts[best] {
                        best = code;
                    }
                }
                values.push(best as f64);
                strategy.push(RefStrategy::Mode);
            }
        }
    }
    ReferenceVector { values, strategy }
}

/// Median with the even-length convention: mean of the two central values.
fn median(v: &[f64]) -> f64 {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Seeded shuffle-and-slice split specification.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    fn validate(&self) -> Result<(), DatasetError> {
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(DatasetError::InvalidSplitSpec(format!(
                "train_fraction must be in (0, 1], got {}",
                self.train_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(DatasetError::InvalidSplitSpec(format!(
                "val_fraction must be in [0, 1), got {}",
                self.val_fraction
            )));
        }
        if self.train_fraction + self.val_fraction > 1.0 + 1e-12 {
            return Err(DatasetError::InvalidSplitSpec(
                "train_fraction + val_fraction must not exceed 1".into(),
            ));
        }
        Ok(())
    }
}

/// Output of [`split`]: datasets plus the original row indices each part
/// received, in their shuffled order. Empty parts are `None`.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub train: Dataset,
    pub val: Option<Dataset>,
    pub test: Option<Dataset>,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Seeded uniform shuffle of 0..n-1 followed by contiguous slicing into
/// train / val / test. Deterministic given the seed.
pub fn split(d: &Dataset, spec: &SplitSpec) -> Result<DataSplit, DatasetError> {
    spec.validate()?;
    let n = d.n();
    // Tiny epsilon so fractions like 0.3 on n=10 floor to the intended count.
    let n_train = ((spec.train_fraction * n as f64) + 1e-9).floor() as usize;
    let n_val = ((spec.val_fraction * n as f64) + 1e-9).floor() as usize;
    let n_train = n_train.min(n);
    let n_val = n_val.min(n - n_train);
    let n_test = n - n_train - n_val;
    let test_fraction = 1.0 - spec.train_fraction - spec.val_fraction;

    if n_train == 0 {
        return Err(DatasetError::FractionTooSmall { part: "train" });
    }
    if spec.val_fraction > 0.0 && n_val == 0 {
        return Err(DatasetError::FractionTooSmall { part: "val" });
    }
    if test_fraction > 1e-12 && n_test == 0 {
        return Err(DatasetError::FractionTooSmall { part: "test" });
    }

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(spec.seed, "dataset/split");
    indices.shuffle(&mut rng);

    let train_indices = indices[..n_train].to_vec();
    let val_indices = indices[n_train..n_train + n_val].to_vec();
    let test_indices = indices[n_train + n_val..].to_vec();

    let train = d.subset(&train_indices)?;
    let val = if n_val > 0 { Some(d.subset(&val_indices)?) } else { None };
    let test = if n_test > 0 { Some(d.subset(&test_indices)?) } else { None };

    Ok(DataSplit { train, val, test, train_indices, val_indices, test_indices })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_col(name: &str, values: &[f64]) -> FeatureColumn {
        FeatureColumn { name: name.into(), data: ColumnData::Numeric(values.to_vec()) }
    }

    fn simple_dataset(n: usize) -> Dataset {
        let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        Dataset::new(
            vec![numeric_col("x", &xs)],
            TargetColumn { name: "y".into(), values: ys },
            TaskKind::Regression,
        )
        .unwrap()
    }

    #[test]
    fn reference_mean_median_mode() {
        let cat = FeatureColumn {
            name: "c".into(),
            data: ColumnData::Categorical {
                levels: vec!["a".into(), "b".into(), "c".into()],
                codes: vec![0, 1, 1, 2],
            },
        };
        let d = Dataset::new(
            vec![numeric_col("x", &[1.0, 2.0, 3.0, 100.0]), cat],
            TargetColumn { name: "y".into(), values: vec![0.0; 4] },
            TaskKind::Regression,
        )
        .unwrap();

        let mean = compute_reference_vector(&d, NumericStrategy::Mean);
        assert_eq!(mean.values[0], 26.5);
        assert_eq!(mean.strategy[0], RefStrategy::Mean);

        let med = compute_reference_vector(&d, NumericStrategy::Median);
        assert_eq!(med.values[0], 2.5);
        assert_eq!(med.strategy[0], RefStrategy::Median);
        // mode of codes [0,1,1,2] is 1, strategy forced to mode
        assert_eq!(med.values[1], 1.0);
        assert_eq!(med.strategy[1], RefStrategy::Mode);
    }

    #[test]
    fn reference_simple_cases() {
        let d = Dataset::new(
            vec![numeric_col("x", &[1.0, 2.0, 3.0])],
            TargetColumn { name: "y".into(), values: vec![0.0; 3] },
            TaskKind::Regression,
        )
        .unwrap();
        assert_eq!(compute_reference_vector(&d, NumericStrategy::Mean).values[0], 2.0);

        let d = Dataset::new(
            vec![numeric_col("x", &[1.0, 2.0, 100.0])],
            TargetColumn { name: "y".into(), values: vec![0.0; 3] },
            TaskKind::Regression,
        )
        .unwrap();
        assert_eq!(compute_reference_vector(&d, NumericStrategy::Median).values[0], 2.0);
    }

    #[test]
    fn mode_ties_break_to_smallest_code() {
        let cat = FeatureColumn {
            name: "c".into(),
            data: ColumnData::Categorical {
                levels: vec!["a".into(), "b".into()],
                codes: vec![1, 0, 0, 1],
            },
        };
        let d = Dataset::new(
            vec![cat],
            TargetColumn { name: "y".into(), values: vec![0.0; 4] },
            TaskKind::Regression,
        )
        .unwrap();
        assert_eq!(compute_reference_vector(&d, NumericStrategy::Mean).values[0], 0.0);
    }

    #[test]
    fn reference_invariant_under_row_permutation() {
        let d = simple_dataset(9);
        let perm: Vec<usize> = vec![4, 2, 7, 0, 8, 1, 6, 3, 5];
        let permuted = d.subset(&perm).unwrap();
        let a = compute_reference_vector(&d, NumericStrategy::Median);
        let b = compute_reference_vector(&permuted, NumericStrategy::Median);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = simple_dataset(10);
        let spec = SplitSpec { train_fraction: 0.8, val_fraction: 0.2, seed: 7 };
        let s1 = split(&d, &spec).unwrap();
        let s2 = split(&d, &spec).unwrap();
        assert_eq!(s1.train_indices.len(), 8);
        assert_eq!(s1.val_indices.len(), 2);
        assert!(s1.test.is_none());
        assert_eq!(s1.train_indices, s2.train_indices);
        assert_eq!(s1.val_indices, s2.val_indices);
    }

    #[test]
    fn split_partitions_all_rows() {
        let d = simple_dataset(23);
        let spec = SplitSpec { train_fraction: 0.6, val_fraction: 0.2, seed: 3 };
        let s = split(&d, &spec).unwrap();
        let mut all: Vec<usize> = s
            .train_indices
            .iter()
            .chain(&s.val_indices)
            .chain(&s.test_indices)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn split_full_train_is_shuffled_whole() {
        let d = simple_dataset(10);
        let spec = SplitSpec { train_fraction: 1.0, val_fraction: 0.0, seed: 1 };
        let s = split(&d, &spec).unwrap();
        assert_eq!(s.train.n(), 10);
        assert!(s.val.is_none() && s.test.is_none());
        let mut sorted = s.train_indices.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_empty_requested_part() {
        let d = simple_dataset(3);
        let spec = SplitSpec { train_fraction: 0.9, val_fraction: 0.05, seed: 0 };
        assert!(matches!(
            split(&d, &spec),
            Err(DatasetError::FractionTooSmall { part: "val" })
        ));
    }

    #[test]
    fn binclass_target_must_be_binary() {
        let err = Dataset::new(
            vec![numeric_col("x", &[1.0, 2.0])],
            TargetColumn { name: "y".into(), values: vec![0.0, 2.0] },
            TaskKind::Binclass,
        );
        assert!(matches!(err, Err(DatasetError::InvalidTarget { .. })));
    }

    #[test]
    fn multiclass_needs_three_classes() {
        let err = Dataset::new(
            vec![numeric_col("x", &[1.0, 2.0])],
            TargetColumn { name: "y".into(), values: vec![0.0, 1.0] },
            TaskKind::Multiclass,
        );
        assert!(matches!(err, Err(DatasetError::InvalidTarget { .. })));
    }
}
