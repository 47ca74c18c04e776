//! Cooperative game over features: coalitions, hybrid inputs, and the three
//! characteristic functions (model output, sample-level performance, global
//! performance), all behind a memoizing evaluator.

mod metrics;

pub use metrics::Metric;

use std::collections::HashMap;

use thiserror::Error;

use crate::dataset::{Dataset, ReferenceVector, TaskKind};
use crate::models::{Model, ModelError, Predictions};

/// A subset of the feature set as a bitmask over feature indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coalition(u128);

impl Coalition {
    /// Bitmask width; games over more features than this are rejected.
    pub const MAX_PLAYERS: usize = 128;

    pub fn empty() -> Self {
        Coalition(0)
    }

    /// The grand coalition over `m` features.
    pub fn full(m: usize) -> Self {
        debug_assert!(m <= Self::MAX_PLAYERS);
        if m == Self::MAX_PLAYERS {
            Coalition(u128::MAX)
        } else {
            Coalition((1u128 << m) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        Coalition(1u128 << i)
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        let mut mask = 0u128;
        for &i in indices {
            mask |= 1u128 << i;
        }
        Coalition(mask)
    }

    pub fn with(self, i: usize) -> Self {
        Coalition(self.0 | (1u128 << i))
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0 & (1u128 << i) != 0
    }

    pub fn len(&self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn bits(&self) -> u128 {
        self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        let mask = self.0;
        (0..Self::MAX_PLAYERS).filter(move |&i| mask & (1u128 << i) != 0)
    }
}

/// The hybrid input of a coalition: observed values for members, reference
/// values for everyone else.
pub fn build_hybrid_input(x: &[f64], s: Coalition, r: &ReferenceVector) -> Vec<f64> {
    debug_assert_eq!(x.len(), r.values.len());
    x.iter()
        .zip(&r.values)
        .enumerate()
        .map(|(i, (&xi, &ri))| if s.contains(i) { xi } else { ri })
        .collect()
}

/// How a coalition's strength is measured.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfMethod {
    ModelOutput,
    SamplePerf,
    GlobalPerf(Metric),
}

impl CfMethod {
    pub fn is_sample_level(&self) -> bool {
        !matches!(self, CfMethod::GlobalPerf(_))
    }
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("metric {metric} is undefined here: {detail}")]
    UndefinedMetric { metric: Metric, detail: String },
    #[error("{0}")]
    Dimension(String),
    #[error("{m} features exceed the {max}-player coalition limit")]
    TooManyFeatures { m: usize, max: usize },
}

/// Anything that can price coalitions. Attribution methods are written
/// against this so they can be exercised on synthetic games directly.
pub trait CoalitionEval {
    fn value(&mut self, s: Coalition) -> Result<f64, GameError>;
    /// Number of distinct coalitions evaluated so far.
    fn eval_count(&self) -> u64;
}

/// What the characteristic function is evaluated against: a single
/// observation for the sample-level methods, a whole dataset for the global
/// one.
pub enum CfContext<'a> {
    Observation { x: Vec<f64>, y: f64 },
    Evaluation(&'a Dataset),
}

/// Memoizing coalition evaluator. The cache is scoped to one
/// (method, context) pair and is never shared across observations.
pub struct CharacteristicFunction<'a> {
    method: CfMethod,
    model: &'a Model,
    reference: &'a ReferenceVector,
    context: CfContext<'a>,
    cache: HashMap<u128, f64>,
    eval_count: u64,
    /// For multiclass model output: the class predicted on the full input,
    /// fixed at construction.
    committed_class: Option<usize>,
}

impl<'a> CharacteristicFunction<'a> {
    pub fn new(
        method: CfMethod,
        model: &'a Model,
        reference: &'a ReferenceVector,
        context: CfContext<'a>,
    ) -> Result<Self, GameError> {
        let m = reference.values.len();
        if m > Coalition::MAX_PLAYERS {
            return Err(GameError::TooManyFeatures { m, max: Coalition::MAX_PLAYERS });
        }
        if m != model.n_inputs() {
            return Err(GameError::Dimension(format!(
                "reference vector has {m} features but the model takes {}",
                model.n_inputs()
            )));
        }
        match (&method, &context) {
            (CfMethod::GlobalPerf(metric), CfContext::Evaluation(d)) => {
                if d.m() != m {
                    return Err(GameError::Dimension(format!(
                        "evaluation dataset has {} features, expected {m}",
                        d.m()
                    )));
                }
                if metric.is_regression() != (model.task() == TaskKind::Regression) {
                    return Err(GameError::UndefinedMetric {
                        metric: *metric,
                        detail: format!("metric does not fit task {}", model.task()),
                    });
                }
            }
            (CfMethod::GlobalPerf(_), _) => {
                return Err(GameError::Dimension(
                    "global_perf needs an evaluation dataset context".into(),
                ))
            }
            (_, CfContext::Observation { x, .. }) => {
                if x.len() != m {
                    return Err(GameError::Dimension(format!(
                        "observation has {} features, expected {m}",
                        x.len()
                    )));
                }
            }
            (_, CfContext::Evaluation(_)) => {
                return Err(GameError::Dimension(
                    "sample-level methods need a single-observation context".into(),
                ))
            }
        }

        let committed_class = match (&method, &context, model.task()) {
            (CfMethod::ModelOutput, CfContext::Observation { x, .. }, TaskKind::Multiclass) => {
                match model.predict(std::slice::from_ref(x))? {
                    Predictions::Classification { labels, .. } => Some(labels[0]),
                    _ => None,
                }
            }
            _ => None,
        };

        Ok(CharacteristicFunction {
            method,
            model,
            reference,
            context,
            cache: HashMap::new(),
            eval_count: 0,
            committed_class,
        })
    }

    pub fn method(&self) -> CfMethod {
        self.method
    }

    pub fn n_players(&self) -> usize {
        self.reference.values.len()
    }

    fn compute(&self, s: Coalition) -> Result<f64, GameError> {
        match (&self.method, &self.context) {
            (CfMethod::ModelOutput, CfContext::Observation { x, .. }) => {
                let z = build_hybrid_input(x, s, self.reference);
                match self.model.predict(&[z])? {
                    Predictions::Regression(v) => Ok(v[0]),
                    Predictions::Classification { probs, .. } => match self.model.task() {
                        // positive-class probability for binary tasks
                        TaskKind::Binclass => Ok(probs[0][1]),
                        // probability of the class committed on the full input
                        _ => Ok(probs[0][self.committed_class.expect("set at construction")]),
                    },
                }
            }
            (CfMethod::SamplePerf, CfContext::Observation { x, y }) => {
                let z = build_hybrid_input(x, s, self.reference);
                match self.model.predict(&[z])? {
                    Predictions::Regression(v) => {
                        let e = v[0] - y;
                        Ok(-(e * e))
                    }
                    Predictions::Classification { labels, .. } => {
                        Ok(if labels[0] as f64 == *y { 1.0 } else { -1.0 })
                    }
                }
            }
            (CfMethod::GlobalPerf(metric), CfContext::Evaluation(d)) => {
                let rows: Vec<Vec<f64>> =
                    (0..d.n()).map(|i| build_hybrid_input(&d.row(i), s, self.reference)).collect();
                let preds = self.model.predict(&rows)?;
                metric.compute(&preds, &d.target().values)
            }
            _ => unreachable!("context validated at construction"),
        }
    }
}

impl CoalitionEval for CharacteristicFunction<'_> {
    fn value(&mut self, s: Coalition) -> Result<f64, GameError> {
        if let Some(&v) = self.cache.get(&s.bits()) {
            return Ok(v);
        }
        let v = self.compute(s)?;
        self.cache.insert(s.bits(), v);
        self.eval_count += 1;
        Ok(v)
    }

    fn eval_count(&self) -> u64 {
        self.eval_count
    }
}

/// Collapses per-sample score matrices into one global score per feature:
/// mean of absolute values for model output (sign only reflects direction),
/// plain mean for the performance-based methods.
pub fn aggregate_sample_scores(per_sample: &[Vec<f64>], method: CfMethod) -> Vec<f64> {
    let m = per_sample.first().map_or(0, |r| r.len());
    let mut out = vec![0.0; m];
    for row in per_sample {
        for (acc, &v) in out.iter_mut().zip(row) {
            *acc += if matches!(method, CfMethod::ModelOutput) { v.abs() } else { v };
        }
    }
    let inv = 1.0 / per_sample.len() as f64;
    for acc in &mut out {
        *acc *= inv;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RefStrategy;
    use crate::models::{LogisticModel, RidgeModel};
    use approx::assert_relative_eq;

    fn reference(values: Vec<f64>) -> ReferenceVector {
        let strategy = vec![RefStrategy::Mean; values.len()];
        ReferenceVector { values, strategy }
    }

    fn ridge_2_1() -> Model {
        // slope 2, intercept 1
        let rows = vec![vec![0.0], vec![1.0], vec![3.0]];
        let ys = vec![1.0, 3.0, 7.0];
        Model::Ridge(RidgeModel::fit(&rows, &ys, 0.0).unwrap())
    }

    #[test]
    fn hybrid_input_by_cases() {
        let r = reference(vec![0.0, 0.0, 0.0]);
        let x = [1.0, 2.0, 3.0];
        assert_eq!(
            build_hybrid_input(&x, Coalition::from_indices(&[0, 2]), &r),
            vec![1.0, 0.0, 3.0]
        );
        assert_eq!(build_hybrid_input(&x, Coalition::full(3), &r), vec![1.0, 2.0, 3.0]);
        assert_eq!(build_hybrid_input(&x, Coalition::empty(), &r), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn hybrid_input_is_idempotent() {
        let r = reference(vec![-1.0, 5.0, 0.25]);
        let x = [1.0, 2.0, 3.0];
        let s = Coalition::from_indices(&[1]);
        let z = build_hybrid_input(&x, s, &r);
        assert_eq!(build_hybrid_input(&z, s, &r), z);
    }

    #[test]
    fn model_output_values() {
        let model = ridge_2_1();
        let r = reference(vec![0.0]);
        let mut cf = CharacteristicFunction::new(
            CfMethod::ModelOutput,
            &model,
            &r,
            CfContext::Observation { x: vec![3.0], y: 0.0 },
        )
        .unwrap();
        assert_relative_eq!(cf.value(Coalition::singleton(0)).unwrap(), 7.0, epsilon = 1e-9);
        assert_relative_eq!(cf.value(Coalition::empty()).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn model_output_zero_logistic_is_half() {
        let model = Model::Logistic(LogisticModel::zeroed(2, 2, TaskKind::Binclass));
        let r = reference(vec![0.0, 0.0]);
        let mut cf = CharacteristicFunction::new(
            CfMethod::ModelOutput,
            &model,
            &r,
            CfContext::Observation { x: vec![4.0, -2.0], y: 1.0 },
        )
        .unwrap();
        assert_relative_eq!(cf.value(Coalition::from_indices(&[0])).unwrap(), 0.5);
        assert_relative_eq!(cf.value(Coalition::full(2)).unwrap(), 0.5);
    }

    #[test]
    fn sample_perf_regression_and_classification() {
        // regression: f(z) = 2.0, y = 3.0 -> -1.0
        let model = ridge_2_1();
        let r = reference(vec![0.5]); // f(0.5) = 2.0
        let mut cf = CharacteristicFunction::new(
            CfMethod::SamplePerf,
            &model,
            &r,
            CfContext::Observation { x: vec![0.5], y: 3.0 },
        )
        .unwrap();
        assert_relative_eq!(cf.value(Coalition::empty()).unwrap(), -1.0, epsilon = 1e-9);
        // grand coalition agrees with the raw residual
        assert_relative_eq!(
            cf.value(Coalition::full(1)).unwrap(),
            -(2.0_f64 - 3.0).powi(2),
            epsilon = 1e-9
        );

        let clf = Model::Logistic(LogisticModel::zeroed(1, 2, TaskKind::Binclass));
        let r = reference(vec![0.0]);
        // zero weights predict label 0 (argmax tie -> lowest index)
        let mut cf = CharacteristicFunction::new(
            CfMethod::SamplePerf,
            &clf,
            &r,
            CfContext::Observation { x: vec![1.0], y: 0.0 },
        )
        .unwrap();
        assert_eq!(cf.value(Coalition::full(1)).unwrap(), 1.0);
        let mut cf = CharacteristicFunction::new(
            CfMethod::SamplePerf,
            &clf,
            &r,
            CfContext::Observation { x: vec![1.0], y: 1.0 },
        )
        .unwrap();
        assert_eq!(cf.value(Coalition::full(1)).unwrap(), -1.0);
    }

    #[test]
    fn memoization_counts_distinct_coalitions() {
        let model = ridge_2_1();
        let r = reference(vec![0.0]);
        let mut cf = CharacteristicFunction::new(
            CfMethod::ModelOutput,
            &model,
            &r,
            CfContext::Observation { x: vec![3.0], y: 0.0 },
        )
        .unwrap();
        let s = Coalition::singleton(0);
        let a = cf.value(s).unwrap();
        let b = cf.value(s).unwrap();
        let _ = cf.value(Coalition::empty()).unwrap();
        let _ = cf.value(Coalition::empty()).unwrap();
        assert_eq!(a, b);
        assert_eq!(cf.eval_count(), 2);
    }

    #[test]
    fn aggregation_rules() {
        let per_sample = vec![vec![0.5], vec![-0.5]];
        assert_eq!(aggregate_sample_scores(&per_sample, CfMethod::ModelOutput), vec![0.5]);
        assert_eq!(aggregate_sample_scores(&per_sample, CfMethod::SamplePerf), vec![0.0]);
        let single = vec![vec![-2.0, 1.0]];
        assert_eq!(aggregate_sample_scores(&single, CfMethod::ModelOutput), vec![2.0, 1.0]);
        assert_eq!(aggregate_sample_scores(&single, CfMethod::SamplePerf), vec![-2.0, 1.0]);
    }
}
