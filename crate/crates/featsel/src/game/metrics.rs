//! Dataset-wide evaluation metrics, all oriented higher-is-better.

use super::GameError;
use crate::models::Predictions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    R2,
    NegMae,
    NegRmse,
    Accuracy,
    F1Macro,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Metric::R2 => "r2",
            Metric::NegMae => "neg_mae",
            Metric::NegRmse => "neg_rmse",
            Metric::Accuracy => "accuracy",
            Metric::F1Macro => "f1_macro",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "r2" => Ok(Metric::R2),
            "neg_mae" | "neg-mae" => Ok(Metric::NegMae),
            "neg_rmse" | "neg-rmse" => Ok(Metric::NegRmse),
            "accuracy" => Ok(Metric::Accuracy),
            "f1_macro" | "f1-macro" => Ok(Metric::F1Macro),
            other => Err(format!(
                "unknown metric {other:?} (expected r2, neg_mae, neg_rmse, accuracy, f1_macro)"
            )),
        }
    }
}

impl Metric {
    pub fn is_regression(&self) -> bool {
        matches!(self, Metric::R2 | Metric::NegMae | Metric::NegRmse)
    }

    pub fn compute(&self, preds: &Predictions, targets: &[f64]) -> Result<f64, GameError> {
        match (self, preds) {
            (Metric::R2, Predictions::Regression(v)) => r2(v, targets).map_err(|detail| {
                GameError::UndefinedMetric { metric: *self, detail }
            }),
            (Metric::NegMae, Predictions::Regression(v)) => {
                let mae = v.iter().zip(targets).map(|(p, y)| (p - y).abs()).sum::<f64>()
                    / targets.len() as f64;
                Ok(-mae)
            }
            (Metric::NegRmse, Predictions::Regression(v)) => {
                let mse = v.iter().zip(targets).map(|(p, y)| (p - y) * (p - y)).sum::<f64>()
                    / targets.len() as f64;
                Ok(-mse.sqrt())
            }
            (Metric::Accuracy, Predictions::Classification { labels, .. }) => {
                let correct =
                    labels.iter().zip(targets).filter(|(&l, &y)| l as f64 == y).count();
                Ok(correct as f64 / targets.len() as f64)
            }
            (Metric::F1Macro, Predictions::Classification { probs, labels }) => {
                let k = probs.first().map_or(2, |p| p.len());
                Ok(f1_macro(labels, targets, k))
            }
            _ => Err(GameError::UndefinedMetric {
                metric: *self,
                detail: "metric does not apply to this prediction kind".into(),
            }),
        }
    }
}

fn r2(preds: &[f64], targets: &[f64]) -> Result<f64, String> {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let ss_tot: f64 = targets.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Err("target variance is zero, R^2 undefined".into());
    }
    let ss_res: f64 = preds.iter().zip(targets).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Macro-averaged F1 over classes 0..k; a class with no true and no predicted
/// members contributes 0.
fn f1_macro(labels: &[usize], targets: &[f64], k: usize) -> f64 {
    let mut f1_sum = 0.0;
    for c in 0..k {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for (&l, &y) in labels.iter().zip(targets) {
            let pred_c = l == c;
            let true_c = y == c as f64;
            match (pred_c, true_c) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        let denom = 2 * tp + fp + fn_;
        if denom > 0 {
            f1_sum += 2.0 * tp as f64 / denom as f64;
        }
    }
    f1_sum / k as f64
}
