//! Feature selection rules: keep scores strictly above a threshold, or keep
//! the top-q fraction.

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::attribution::ImportanceScores;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    Threshold(f64),
    TopQ(f64),
}

/// Which features survive, with the evidence that selected them.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionMask {
    pub mask: Vec<bool>,
    pub feature_names: Vec<String>,
    pub retained: Vec<String>,
    pub rule: SelectionRule,
    pub scores: Vec<f64>,
}

impl SelectionMask {
    pub fn retained_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("selection mask serializes")
    }
}

/// Top-q keeps `max(1, round_half_up(q * M))` features; ties at the cut keep
/// the lower feature index. The threshold rule keeps scores strictly greater
/// than tau and errors out rather than returning an empty set.
pub fn select_features(
    scores: &ImportanceScores,
    rule: SelectionRule,
) -> Result<SelectionMask, PipelineError> {
    let m = scores.scores.len();
    let mut mask = vec![false; m];
    match rule {
        SelectionRule::Threshold(tau) => {
            for (i, &s) in scores.scores.iter().enumerate() {
                if s > tau {
                    mask[i] = true;
                }
            }
            if mask.iter().all(|&b| !b) {
                let max_score = scores.scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                return Err(PipelineError::EmptySelection { threshold: tau, max_score });
            }
        }
        SelectionRule::TopQ(q) => {
            if !(q > 0.0 && q <= 1.0) {
                return Err(PipelineError::InvalidConfig(format!(
                    "top_q must be in (0, 1], got {q}"
                )));
            }
            let keep = ((q * m as f64).round() as usize).max(1);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| scores.scores[b].total_cmp(&scores.scores[a]).then(a.cmp(&b)));
            for &i in order.iter().take(keep) {
                mask[i] = true;
            }
        }
    }

    let retained = scores
        .feature_names
        .iter()
        .zip(&mask)
        .filter(|(_, &keep)| keep)
        .map(|(n, _)| n.clone())
        .collect();
    Ok(SelectionMask {
        mask,
        feature_names: scores.feature_names.clone(),
        retained,
        rule,
        scores: scores.scores.clone(),
    })
}
