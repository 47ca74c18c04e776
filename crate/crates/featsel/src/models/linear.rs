//! Closed-form ridge regression and softmax logistic regression.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use super::{argmax, ModelError, Predictions};
use crate::dataset::TaskKind;
use crate::rng::stream_rng;

/// Ridge regression solved via the normal equations. The intercept column is
/// never penalized.
#[derive(Debug, Clone)]
pub struct RidgeModel {
    weights: Vec<f64>,
    intercept: f64,
}

impl RidgeModel {
    pub fn fit(rows: &[Vec<f64>], targets: &[f64], lambda: f64) -> Result<Self, ModelError> {
        let n = rows.len();
        let d = rows[0].len();
        let p = d + 1; // + intercept

        // A = X^T X + lambda * diag(1..1, 0), b = X^T y
        let mut a = DMatrix::<f64>::zeros(p, p);
        let mut b = DVector::<f64>::zeros(p);
        for (row, &y) in rows.iter().zip(targets) {
            for i in 0..d {
                for j in 0..d {
                    a[(i, j)] += row[i] * row[j];
                }
                a[(i, d)] += row[i];
                a[(d, i)] += row[i];
                b[i] += row[i] * y;
            }
            a[(d, d)] += 1.0;
            b[d] += y;
        }
        for i in 0..d {
            a[(i, i)] += lambda;
        }

        let svd = a.clone().svd(true, true);
        let max_sv = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        let eps = max_sv * p as f64 * f64::EPSILON;
        if svd.rank(eps.max(f64::MIN_POSITIVE)) < p {
            return Err(ModelError::SingularSystem);
        }
        let beta = svd.solve(&b, eps).map_err(|_| ModelError::SingularSystem)?;

        let _ = n;
        Ok(RidgeModel {
            weights: beta.as_slice()[..d].to_vec(),
            intercept: beta[d],
        })
    }

    /// Model with explicit coefficients, bypassing fitting.
    pub fn with_coefficients(weights: Vec<f64>, intercept: f64) -> Self {
        RidgeModel { weights, intercept }
    }

    pub fn n_inputs(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Predictions {
        let out = rows
            .iter()
            .map(|row| {
                self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + self.intercept
            })
            .collect();
        Predictions::Regression(out)
    }
}

/// Multinomial logistic regression trained by seeded mini-batch gradient
/// descent on cross-entropy. Binary classification is the K = 2 case, so
/// all-zero weights give probability 0.5 for both classes.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    /// K x (d + 1) row-major; last column is the bias.
    weights: Vec<f64>,
    n_inputs: usize,
    n_classes: usize,
    task: TaskKind,
}

impl LogisticModel {
    #[allow(clippy::too_many_arguments)]
    pub fn fit(
        rows: &[Vec<f64>],
        targets: &[f64],
        n_classes: usize,
        task: TaskKind,
        lr: f64,
        epochs: usize,
        batch: usize,
        seed: u64,
        val: &Option<(Vec<Vec<f64>>, &[f64])>,
        patience: Option<usize>,
    ) -> Result<Self, ModelError> {
        let n = rows.len();
        let d = rows[0].len();
        let k = n_classes.max(2);
        let mut model = LogisticModel::zeroed(d, k, task);
        let mut rng = stream_rng(seed, "models/logistic");
        let batch = batch.clamp(1, n);

        let mut order: Vec<usize> = (0..n).collect();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut since_best = 0usize;

        for epoch in 0..epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                let mut grad = vec![0.0; k * (d + 1)];
                for &i in chunk {
                    let probs = model.probs_row(&rows[i]);
                    let y = targets[i] as usize;
                    for c in 0..k {
                        let delta = probs[c] - if c == y { 1.0 } else { 0.0 };
                        let base = c * (d + 1);
                        for (j, &x) in rows[i].iter().enumerate() {
                            grad[base + j] += delta * x;
                        }
                        grad[base + d] += delta;
                    }
                }
                let scale = lr / chunk.len() as f64;
                for (w, g) in model.weights.iter_mut().zip(&grad) {
                    *w -= scale * g;
                }
            }
            let loss = model.mean_cross_entropy(rows, targets);
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch });
            }
            if let (Some((vr, vy)), Some(p)) = (val, patience) {
                let vloss = model.mean_cross_entropy(vr, vy);
                if !vloss.is_finite() {
                    return Err(ModelError::NonFiniteLoss { epoch });
                }
                match &best {
                    Some((b, _)) if vloss >= *b => {
                        since_best += 1;
                        if since_best >= p {
                            break;
                        }
                    }
                    _ => {
                        best = Some((vloss, model.weights.clone()));
                        since_best = 0;
                    }
                }
            }
        }
        if let Some((_, w)) = best {
            model.weights = w;
        }
        Ok(model)
    }

    pub fn zeroed(n_inputs: usize, n_classes: usize, task: TaskKind) -> Self {
        LogisticModel {
            weights: vec![0.0; n_classes * (n_inputs + 1)],
            n_inputs,
            n_classes,
            task,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn logits_row(&self, row: &[f64]) -> Vec<f64> {
        let d = self.n_inputs;
        (0..self.n_classes)
            .map(|c| {
                let base = c * (d + 1);
                let w = &self.weights[base..base + d];
                w.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + self.weights[base + d]
            })
            .collect()
    }

    fn probs_row(&self, row: &[f64]) -> Vec<f64> {
        softmax(&self.logits_row(row))
    }

    pub fn mean_cross_entropy(&self, rows: &[Vec<f64>], targets: &[f64]) -> f64 {
        let mut total = 0.0;
        for (row, &y) in rows.iter().zip(targets) {
            let p = self.probs_row(row)[y as usize];
            total -= p.max(1e-300).ln();
        }
        total / rows.len() as f64
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Predictions {
        let probs: Vec<Vec<f64>> = rows.iter().map(|r| self.probs_row(r)).collect();
        let labels = probs.iter().map(|p| argmax(p)).collect();
        Predictions::Classification { probs, labels }
    }
}

/// Numerically stable softmax.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}
