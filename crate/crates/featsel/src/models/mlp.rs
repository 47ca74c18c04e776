//! One-hidden-layer MLP with rectified-linear activation, trained by seeded
//! mini-batch gradient descent. Parameters live in one flat vector so
//! gradients can be checked against finite differences.

use rand::seq::SliceRandom;
use rand::Rng;

use super::linear::softmax;
use super::{argmax, ModelError, Predictions};
use crate::dataset::TaskKind;
use crate::rng::stream_rng;

#[derive(Debug, Clone)]
pub struct MlpModel {
    /// [W1 (h*d), b1 (h), W2 (o*h), b2 (o)] row-major.
    params: Vec<f64>,
    n_inputs: usize,
    hidden: usize,
    outputs: usize,
    task: TaskKind,
}

impl MlpModel {
    /// Fresh network with seeded uniform init scaled by 1/sqrt(fan_in);
    /// biases start at zero.
    pub fn initialized(
        n_inputs: usize,
        hidden: usize,
        task: TaskKind,
        n_classes: usize,
        seed: u64,
    ) -> Self {
        let outputs = if task == TaskKind::Regression { 1 } else { n_classes.max(2) };
        let mut rng = stream_rng(seed, "models/mlp");
        let mut params = Vec::with_capacity(hidden * n_inputs + hidden + outputs * hidden + outputs);
        let w1_scale = 1.0 / (n_inputs as f64).sqrt();
        for _ in 0..hidden * n_inputs {
            params.push(rng.gen_range(-w1_scale..w1_scale));
        }
        params.extend(std::iter::repeat(0.0).take(hidden));
        let w2_scale = 1.0 / (hidden as f64).sqrt();
        for _ in 0..outputs * hidden {
            params.push(rng.gen_range(-w2_scale..w2_scale));
        }
        params.extend(std::iter::repeat(0.0).take(outputs));
        MlpModel { params, n_inputs, hidden, outputs, task }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn fit(
        rows: &[Vec<f64>],
        targets: &[f64],
        task: TaskKind,
        n_classes: usize,
        hidden: usize,
        lr: f64,
        epochs: usize,
        batch: usize,
        seed: u64,
        val: &Option<(Vec<Vec<f64>>, &[f64])>,
        patience: Option<usize>,
    ) -> Result<Self, ModelError> {
        let n = rows.len();
        let d = rows[0].len();
        let mut model = MlpModel::initialized(d, hidden, task, n_classes, seed);
        let mut rng = stream_rng(seed, "models/mlp/shuffle");
        let batch = batch.clamp(1, n);

        let mut order: Vec<usize> = (0..n).collect();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut since_best = 0usize;

        for epoch in 0..epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                let (_, grad) = model.loss_and_grad_indices(rows, targets, chunk);
                for (p, g) in model.params.iter_mut().zip(&grad) {
                    *p -= lr * g;
                }
            }
            let loss = model.loss(rows, targets);
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch });
            }
            if let (Some((vr, vy)), Some(p)) = (val, patience) {
                let vloss = model.loss(vr, vy);
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
                        best = Some((vloss, model.params.clone()));
                        since_best = 0;
                    }
                }
            }
        }
        if let Some((_, p)) = best {
            model.params = p;
        }
        Ok(model)
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn slices(&self) -> (usize, usize, usize) {
        let w1 = self.hidden * self.n_inputs;
        let b1 = w1 + self.hidden;
        let w2 = b1 + self.outputs * self.hidden;
        (w1, b1, w2)
    }

    /// Hidden activations and raw outputs for one row.
    fn forward(&self, row: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (w1_end, b1_end, w2_end) = self.slices();
        let w1 = &self.params[..w1_end];
        let b1 = &self.params[w1_end..b1_end];
        let w2 = &self.params[b1_end..w2_end];
        let b2 = &self.params[w2_end..];

        let mut hidden = vec![0.0; self.hidden];
        for j in 0..self.hidden {
            let base = j * self.n_inputs;
            let pre: f64 =
                w1[base..base + self.n_inputs].iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
                    + b1[j];
            hidden[j] = pre.max(0.0);
        }
        let mut out = vec![0.0; self.outputs];
        for (c, o) in out.iter_mut().enumerate() {
            let base = c * self.hidden;
            *o = w2[base..base + self.hidden].iter().zip(&hidden).map(|(w, a)| w * a).sum::<f64>()
                + b2[c];
        }
        (hidden, out)
    }

    /// Mean loss over the batch: squared error for regression, cross-entropy
    /// for classification.
    pub fn loss(&self, rows: &[Vec<f64>], targets: &[f64]) -> f64 {
        let idx: Vec<usize> = (0..rows.len()).collect();
        self.loss_and_grad_indices(rows, targets, &idx).0
    }

    /// Mean loss and its gradient with respect to the flat parameter vector.
    pub fn loss_and_grad(&self, rows: &[Vec<f64>], targets: &[f64]) -> (f64, Vec<f64>) {
        let idx: Vec<usize> = (0..rows.len()).collect();
        self.loss_and_grad_indices(rows, targets, &idx)
    }

    fn loss_and_grad_indices(
        &self,
        rows: &[Vec<f64>],
        targets: &[f64],
        indices: &[usize],
    ) -> (f64, Vec<f64>) {
        let (w1_end, b1_end, w2_end) = self.slices();
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let inv = 1.0 / indices.len() as f64;

        for &i in indices {
            let row = &rows[i];
            let (hidden, out) = self.forward(row);
            // d(loss)/d(out)
            let dout: Vec<f64> = match self.task {
                TaskKind::Regression => {
                    let e = out[0] - targets[i];
                    loss += e * e * inv;
                    vec![2.0 * e * inv]
                }
                _ => {
                    let p = softmax(&out);
                    let y = targets[i] as usize;
                    loss -= p[y].max(1e-300).ln() * inv;
                    p.iter()
                        .enumerate()
                        .map(|(c, &pc)| (pc - if c == y { 1.0 } else { 0.0 }) * inv)
                        .collect()
                }
            };

            let w2 = &self.params[b1_end..w2_end];
            let mut dhidden = vec![0.0; self.hidden];
            for (c, &dc) in dout.iter().enumerate() {
                let base = c * self.hidden;
                for j in 0..self.hidden {
                    grad[b1_end + base + j] += dc * hidden[j];
                    dhidden[j] += dc * w2[base + j];
                }
                grad[w2_end + c] += dc;
            }
            for j in 0..self.hidden {
                if hidden[j] > 0.0 {
                    let base = j * self.n_inputs;
                    for (k, &x) in row.iter().enumerate() {
                        grad[base + k] += dhidden[j] * x;
                    }
                    grad[w1_end + j] += dhidden[j];
                }
            }
        }
        (loss, grad)
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Predictions {
        match self.task {
            TaskKind::Regression => {
                Predictions::Regression(rows.iter().map(|r| self.forward(r).1[0]).collect())
            }
            _ => {
                let probs: Vec<Vec<f64>> =
                    rows.iter().map(|r| softmax(&self.forward(r).1)).collect();
                let labels = probs.iter().map(|p| argmax(p)).collect();
                Predictions::Classification { probs, labels }
            }
        }
    }
}
