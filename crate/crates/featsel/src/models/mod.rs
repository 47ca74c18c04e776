//! Trainable predictors behind one contract.
//!
//! Built-ins cover desk-scale verification: closed-form ridge regression,
//! softmax logistic regression, and a one-hidden-layer MLP, all deterministic
//! given a seed. The `external` kind delegates prediction to a child process
//! speaking a newline-delimited JSON protocol (see [`protocol`]), which is how
//! heavier model stacks plug into the importance engine without retraining.

mod linear;
mod mlp;

pub mod external;
pub mod protocol;

pub use external::{external_connect, ExternalModel, DEFAULT_PROTOCOL_TIMEOUT};
pub use linear::{LogisticModel, RidgeModel};
pub use mlp::MlpModel;

use thiserror::Error;

use crate::dataset::{Dataset, TaskKind};

/// What to train (or connect to), plus the task and seed.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PredictorSpec {
    pub kind: PredictorKind,
    pub task: TaskKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PredictorKind {
    Ridge { lambda: f64 },
    Logistic { lr: f64, epochs: usize, batch: usize },
    Mlp { hidden_width: usize, lr: f64, epochs: usize, batch: usize },
    External { command: Vec<String> },
}

impl PredictorSpec {
    fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidSpec(msg));
        match &self.kind {
            PredictorKind::Ridge { lambda } => {
                if *lambda < 0.0 || !lambda.is_finite() {
                    return bad(format!("ridge lambda must be >= 0, got {lambda}"));
                }
                if self.task != TaskKind::Regression {
                    return bad("ridge supports regression only".into());
                }
            }
            PredictorKind::Logistic { lr, epochs, .. } => {
                if *lr <= 0.0 {
                    return bad(format!("logistic lr must be > 0, got {lr}"));
                }
                if *epochs < 1 {
                    return bad("logistic epochs must be >= 1".into());
                }
                if self.task == TaskKind::Regression {
                    return bad("logistic supports classification only".into());
                }
            }
            PredictorKind::Mlp { hidden_width, lr, epochs, .. } => {
                if *hidden_width < 1 {
                    return bad("mlp hidden_width must be >= 1".into());
                }
                if *lr <= 0.0 {
                    return bad(format!("mlp lr must be > 0, got {lr}"));
                }
                if *epochs < 1 {
                    return bad("mlp epochs must be >= 1".into());
                }
            }
            PredictorKind::External { command } => {
                if command.is_empty() {
                    return bad("external command must not be empty".into());
                }
            }
        }
        Ok(())
    }
}

/// Batch prediction output.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Regression(Vec<f64>),
    /// Per-row probability vectors plus argmax labels (ties break to the
    /// lowest class index).
    Classification { probs: Vec<Vec<f64>>, labels: Vec<usize> },
}

impl Predictions {
    pub fn len(&self) -> usize {
        match self {
            Predictions::Regression(v) => v.len(),
            Predictions::Classification { probs, .. } => probs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Argmax with ties to the lowest index.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid predictor spec: {0}")]
    InvalidSpec(String),
    #[error("singular system: normal equations are rank-deficient (try lambda > 0)")]
    SingularSystem,
    #[error("non-finite loss at epoch {epoch}: training diverged")]
    NonFiniteLoss { epoch: usize },
    #[error("dimension mismatch: model expects {expected} inputs, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("failed to spawn external model {command:?}: {source}")]
    SpawnFailure { command: String, source: std::io::Error },
    #[error("external model protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("external model timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("external model i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A fitted predictor. Immutable; safe for concurrent `predict` calls.
pub enum Model {
    Ridge(RidgeModel),
    Logistic(LogisticModel),
    Mlp(MlpModel),
    External(ExternalModel),
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Model::Ridge(_) => write!(f, "Model::Ridge"),
            Model::Logistic(_) => write!(f, "Model::Logistic"),
            Model::Mlp(_) => write!(f, "Model::Mlp"),
            Model::External(_) => write!(f, "Model::External"),
        }
    }
}

impl Model {
    /// Input width the model was fitted on (masked feature count).
    pub fn n_inputs(&self) -> usize {
        match self {
            Model::Ridge(m) => m.n_inputs(),
            Model::Logistic(m) => m.n_inputs(),
            Model::Mlp(m) => m.n_inputs(),
            Model::External(m) => m.n_features(),
        }
    }

    pub fn task(&self) -> TaskKind {
        match self {
            Model::Ridge(_) => TaskKind::Regression,
            Model::Logistic(m) => m.task(),
            Model::Mlp(m) => m.task(),
            Model::External(m) => m.task(),
        }
    }

    /// Batch prediction; a pure function of (model, rows).
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Predictions, ModelError> {
        let expected = self.n_inputs();
        for row in rows {
            if row.len() != expected {
                return Err(ModelError::DimensionMismatch { expected, got: row.len() });
            }
        }
        match self {
            Model::Ridge(m) => Ok(m.predict(rows)),
            Model::Logistic(m) => Ok(m.predict(rows)),
            Model::Mlp(m) => Ok(m.predict(rows)),
            Model::External(m) => m.predict(rows),
        }
    }
}

/// Options for [`fit_with_options`]: a validation set enables early stopping
/// with the given patience. Ignored by closed-form and external predictors.
#[derive(Debug, Clone, Copy, Default)]
pub struct FitOptions<'a> {
    pub val: Option<&'a Dataset>,
    pub patience: Option<usize>,
}

/// Trains a predictor on the masked feature set. Deterministic given the
/// spec seed. Masked-out features are excluded from the model's input
/// dimension; the intercept term is always present and never masked.
pub fn fit(spec: &PredictorSpec, train: &Dataset, feature_mask: &[bool]) -> Result<Model, ModelError> {
    fit_with_options(spec, train, feature_mask, FitOptions::default())
}

pub fn fit_with_options(
    spec: &PredictorSpec,
    train: &Dataset,
    feature_mask: &[bool],
    opts: FitOptions<'_>,
) -> Result<Model, ModelError> {
    spec.validate()?;
    if feature_mask.len() != train.m() {
        return Err(ModelError::InvalidSpec(format!(
            "feature mask has {} entries for {} features",
            feature_mask.len(),
            train.m()
        )));
    }
    let d = feature_mask.iter().filter(|&&b| b).count();
    if d == 0 {
        return Err(ModelError::InvalidSpec("feature mask selects no features".into()));
    }
    if spec.task != train.task() {
        return Err(ModelError::InvalidSpec(format!(
            "spec task {} does not match dataset task {}",
            spec.task,
            train.task()
        )));
    }

    let rows = train.rows_masked(feature_mask);
    let targets = &train.target().values;
    let val: Option<(Vec<Vec<f64>>, &[f64])> = opts
        .val
        .map(|v| (v.rows_masked(feature_mask), v.target().values.as_slice()));
    let patience = match (&val, opts.patience) {
        (Some(_), Some(p)) => Some(p),
        _ => None,
    };

    match &spec.kind {
        PredictorKind::Ridge { lambda } => {
            Ok(Model::Ridge(RidgeModel::fit(&rows, targets, *lambda)?))
        }
        PredictorKind::Logistic { lr, epochs, batch } => {
            let k = train.n_classes();
            Ok(Model::Logistic(LogisticModel::fit(
                &rows, targets, k, spec.task, *lr, *epochs, *batch, spec.seed, &val, patience,
            )?))
        }
        PredictorKind::Mlp { hidden_width, lr, epochs, batch } => {
            let k = train.n_classes();
            Ok(Model::Mlp(MlpModel::fit(
                &rows,
                targets,
                spec.task,
                k,
                *hidden_width,
                *lr,
                *epochs,
                *batch,
                spec.seed,
                &val,
                patience,
            )?))
        }
        PredictorKind::External { command } => {
            let model = external_connect(command, DEFAULT_PROTOCOL_TIMEOUT)?;
            if model.task() != spec.task {
                return Err(ModelError::ProtocolViolation(format!(
                    "external model reports task {}, spec expects {}",
                    model.task(),
                    spec.task
                )));
            }
            if model.n_features() != d {
                return Err(ModelError::DimensionMismatch { expected: model.n_features(), got: d });
            }
            Ok(Model::External(model))
        }
    }
}
