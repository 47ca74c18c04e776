//! Feature importance from coalition games: exact Shapley, the CIS value,
//! Monte Carlo Shapley, graph-restricted ShapG, and permutation feature
//! importance.

pub mod graph;
mod pfi;
mod sample;
mod shapg;

pub use graph::{build_feature_graph, complete_feature_graph, prune_graph, FeatureGraph};
pub use pfi::{pfi, DEFAULT_PFI_REPEATS};
pub use sample::{importance_over_sample, CoalitionMethod};
pub use shapg::shapg;

use itertools::Itertools;
use rand::seq::SliceRandom;
use thiserror::Error;

use crate::game::{CfMethod, Coalition, CoalitionEval, GameError, Metric};
use crate::rng::stream_rng;

/// Guard against the 2^M blowup of exact Shapley.
pub const DEFAULT_MAX_EXACT_PLAYERS: usize = 20;

#[derive(Debug, Error)]
pub enum AttributionError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("too many players for exact Shapley: {m} > {max}")]
    TooManyPlayers { m: usize, max: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("malformed importance scores: {0}")]
    MalformedScores(String),
}

/// Exact Shapley values by the permutation-weighted marginal formula, with
/// the default player guard of [`DEFAULT_MAX_EXACT_PLAYERS`].
pub fn shapley_exact(
    v: &mut dyn CoalitionEval,
    players: &[usize],
) -> Result<Vec<f64>, AttributionError> {
    shapley_exact_with_limit(v, players, DEFAULT_MAX_EXACT_PLAYERS)
}

/// Exact Shapley with a caller-chosen player guard. Evaluates every one of
/// the 2^|players| coalitions exactly once (the evaluator memoizes).
pub fn shapley_exact_with_limit(
    v: &mut dyn CoalitionEval,
    players: &[usize],
    max_players: usize,
) -> Result<Vec<f64>, AttributionError> {
    let m = players.len();
    if m > max_players {
        return Err(AttributionError::TooManyPlayers { m, max: max_players });
    }
    if m == 0 {
        return Ok(Vec::new());
    }

    // Map local subsets to global coalition bitmasks, then pull every
    // coalition value once.
    let size = 1usize << m;
    let mut global = vec![0u128; size];
    for mask in 1..size {
        let low = mask.trailing_zeros() as usize;
        global[mask] = global[mask & (mask - 1)] | (1u128 << players[low]);
    }
    let mut vals = vec![0.0; size];
    for mask in 0..size {
        vals[mask] = v.value(Coalition::from_bits(global[mask]))?;
    }

    // weight(|S|) = |S|! (m - |S| - 1)! / m!  =  1 / (m * C(m-1, |S|))
    let mut weight = vec![0.0; m];
    for (s, w) in weight.iter_mut().enumerate() {
        *w = 1.0 / (m as f64 * binomial(m - 1, s));
    }

    let mut phi = vec![0.0; m];
    for (i, phi_i) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        for mask in 0..size {
            if mask & bit == 0 {
                let marginal = vals[mask | bit] - vals[mask];
                *phi_i += weight[mask.count_ones() as usize] * marginal;
            }
        }
    }
    Ok(phi)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    let mut out = 1.0;
    for i in 0..k {
        out = out * (n - i) as f64 / (i + 1) as f64;
    }
    out
}

/// CIS value: each player's singleton worth plus an equal share of the
/// surplus. Costs the M singleton coalitions plus the grand coalition.
pub fn cis_value(
    v: &mut dyn CoalitionEval,
    players: &[usize],
) -> Result<Vec<f64>, AttributionError> {
    let m = players.len();
    if m == 0 {
        return Err(AttributionError::InvalidParam("cis_value needs at least one player".into()));
    }
    let mut singles = Vec::with_capacity(m);
    for &p in players {
        singles.push(v.value(Coalition::singleton(p))?);
    }
    let grand = v.value(Coalition::from_indices(players))?;
    let surplus_share = (grand - singles.iter().sum::<f64>()) / m as f64;
    Ok(singles.into_iter().map(|s| s + surplus_share).collect())
}

/// Monte Carlo Shapley: marginal contributions averaged over seeded uniform
/// random player permutations. When the full m! permutations fit inside
/// `n_perms`, they are enumerated exactly once each instead of sampled, so a
/// generous budget on a small game reproduces the exact value.
pub fn shapley_mc(
    v: &mut dyn CoalitionEval,
    players: &[usize],
    n_perms: usize,
    seed: u64,
) -> Result<Vec<f64>, AttributionError> {
    if n_perms == 0 {
        return Err(AttributionError::InvalidParam("n_perms must be >= 1".into()));
    }
    let m = players.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut position = std::collections::HashMap::with_capacity(m);
    for (i, &p) in players.iter().enumerate() {
        position.insert(p, i);
    }

    let mut sums = vec![0.0; m];
    let mut walk = |perm: &[usize], sums: &mut [f64]| -> Result<(), AttributionError> {
        let mut prefix = Coalition::empty();
        let mut prev = v.value(prefix)?;
        for &p in perm {
            prefix = prefix.with(p);
            let cur = v.value(prefix)?;
            sums[position[&p]] += cur - prev;
            prev = cur;
        }
        Ok(())
    };

    let count = match factorial_within(m, n_perms) {
        Some(total) => {
            for perm in players.iter().copied().permutations(m) {
                walk(&perm, &mut sums)?;
            }
            total
        }
        None => {
            let mut rng = stream_rng(seed, "attribution/mc");
            let mut perm = players.to_vec();
            for _ in 0..n_perms {
                perm.shuffle(&mut rng);
                walk(&perm, &mut sums)?;
            }
            n_perms
        }
    };

    for s in &mut sums {
        *s /= count as f64;
    }
    Ok(sums)
}

/// m! when it does not exceed `budget`.
fn factorial_within(m: usize, budget: usize) -> Option<usize> {
    let mut f = 1usize;
    for i in 2..=m {
        f = f.checked_mul(i)?;
        if f > budget {
            return None;
        }
    }
    (f <= budget).then_some(f)
}

impl Coalition {
    pub(crate) fn from_bits(bits: u128) -> Self {
        Coalition::from_indices(
            &(0..Self::MAX_PLAYERS).filter(|&i| bits & (1u128 << i) != 0).collect::<Vec<_>>(),
        )
    }
}

/// Which score producer generated an [`ImportanceScores`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportanceMethod {
    Shapley,
    Cis,
    Shapg,
    Pfi,
}

impl std::fmt::Display for ImportanceMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ImportanceMethod::Shapley => "shapley",
            ImportanceMethod::Cis => "cis",
            ImportanceMethod::Shapg => "shapg",
            ImportanceMethod::Pfi => "pfi",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for ImportanceMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shapley" => Ok(ImportanceMethod::Shapley),
            "cis" => Ok(ImportanceMethod::Cis),
            "shapg" => Ok(ImportanceMethod::Shapg),
            "pfi" => Ok(ImportanceMethod::Pfi),
            other => Err(format!("unknown method {other:?} (expected shapg, pfi, shapley, cis)")),
        }
    }
}

/// Per-feature importance scores with provenance.
#[derive(Debug, Clone)]
pub struct ImportanceScores {
    pub method: ImportanceMethod,
    /// Characteristic-function method for game-based scores; `None` for PFI.
    pub char_fn: Option<CfMethod>,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub scores: Vec<f64>,
    /// Per-observation score matrix for sample-level runs.
    pub per_sample: Option<Vec<Vec<f64>>>,
    /// Distinct characteristic-function evaluations (or metric evaluations
    /// for PFI) spent producing the scores.
    pub eval_count: u64,
}

impl ImportanceScores {
    /// 1-based ranks by descending score; ties keep the lower feature index
    /// first.
    pub fn ranks(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        let mut ranks = vec![0; self.scores.len()];
        for (rank, &idx) in order.iter().enumerate() {
            ranks[idx] = rank + 1;
        }
        ranks
    }

    pub fn to_json(&self) -> serde_json::Value {
        let ranks = self.ranks();
        let scores: Vec<serde_json::Value> = self
            .feature_names
            .iter()
            .zip(&self.scores)
            .zip(&ranks)
            .map(|((name, score), rank)| {
                serde_json::json!({ "feature": name, "score": score, "rank": rank })
            })
            .collect();
        let (char_fn, metric) = match self.char_fn {
            None => (serde_json::Value::Null, None),
            Some(CfMethod::ModelOutput) => (serde_json::json!("output"), None),
            Some(CfMethod::SamplePerf) => (serde_json::json!("sample-perf"), None),
            Some(CfMethod::GlobalPerf(m)) => {
                (serde_json::json!("global-perf"), Some(m.to_string()))
            }
        };
        let mut obj = serde_json::json!({
            "method": self.method.to_string(),
            "char_fn": char_fn,
            "seed": self.seed,
            "scores": scores,
            "eval_counts": self.eval_count,
        });
        if let Some(metric) = metric {
            obj["metric"] = serde_json::json!(metric);
        }
        obj
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("scores serialize")
    }

    /// Parses the JSON artifact written by [`to_json`]. Feature order is the
    /// order of the `scores` array.
    pub fn from_json_str(s: &str) -> Result<Self, AttributionError> {
        #[derive(serde::Deserialize)]
        struct Entry {
            feature: String,
            score: f64,
            #[allow(dead_code)]
            rank: Option<usize>,
        }
        #[derive(serde::Deserialize)]
        struct Raw {
            method: String,
            char_fn: Option<String>,
            metric: Option<String>,
            seed: u64,
            scores: Vec<Entry>,
            eval_counts: u64,
        }
        let raw: Raw =
            serde_json::from_str(s).map_err(|e| AttributionError::MalformedScores(e.to_string()))?;
        let method: ImportanceMethod =
            raw.method.parse().map_err(AttributionError::MalformedScores)?;
        let char_fn = match raw.char_fn.as_deref() {
            None => None,
            Some("output") => Some(CfMethod::ModelOutput),
            Some("sample-perf") => Some(CfMethod::SamplePerf),
            Some("global-perf") => {
                let metric: Metric = raw
                    .metric
                    .as_deref()
                    .ok_or_else(|| {
                        AttributionError::MalformedScores(
                            "global-perf scores need a metric field".into(),
                        )
                    })?
                    .parse()
                    .map_err(AttributionError::MalformedScores)?;
                Some(CfMethod::GlobalPerf(metric))
            }
            Some(other) => {
                return Err(AttributionError::MalformedScores(format!(
                    "unknown char_fn {other:?}"
                )))
            }
        };
        if raw.scores.is_empty() {
            return Err(AttributionError::MalformedScores("empty scores array".into()));
        }
        let mut feature_names = Vec::with_capacity(raw.scores.len());
        let mut scores = Vec::with_capacity(raw.scores.len());
        for e in raw.scores {
            if !e.score.is_finite() {
                return Err(AttributionError::MalformedScores(format!(
                    "non-finite score for feature {:?}",
                    e.feature
                )));
            }
            feature_names.push(e.feature);
            scores.push(e.score);
        }
        Ok(ImportanceScores {
            method,
            char_fn,
            seed: raw.seed,
            feature_names,
            scores,
            per_sample: None,
            eval_count: raw.eval_counts,
        })
    }
}


#[cfg(test)]
mod tests {
    use super::test_games::*;
    use super::*;
    use approx::assert_relative_eq;
    use std::collections::HashMap;

    #[test]
    fn two_player_closed_form() {
        // v(∅)=0, v({1})=1, v({2})=2, v({1,2})=4 -> phi = (1.5, 2.5)
        let mut values = HashMap::new();
        values.insert(0u128, 0.0);
        values.insert(0b01, 1.0);
        values.insert(0b10, 2.0);
        values.insert(0b11, 4.0);
        let mut game = TableGame::new(values);
        let phi = shapley_exact(&mut game, &[0, 1]).unwrap();
        assert_relative_eq!(phi[0], 1.5, epsilon = 1e-12);
        assert_relative_eq!(phi[1], 2.5, epsilon = 1e-12);
        assert_eq!(game.eval_count(), 4);
    }

    #[test]
    fn additive_game_recovers_weights() {
        let weights = [0.5, -1.25, 3.0];
        let mut game = TableGame::additive(&[0, 1, 2], &weights);
        let phi = shapley_exact(&mut game, &[0, 1, 2]).unwrap();
        for (p, w) in phi.iter().zip(&weights) {
            assert_relative_eq!(p, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn exact_matches_permutation_oracle_on_random_games() {
        for seed in 0..5 {
            let players = [0, 1, 2, 3];
            let mut game = TableGame::random(&players, seed);
            let fast = shapley_exact(&mut game, &players).unwrap();
            let mut oracle_game = TableGame::random(&players, seed);
            let slow = shapley_by_permutations(&mut oracle_game, &players);
            for (f, s) in fast.iter().zip(&slow) {
                assert_relative_eq!(f, s, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn exact_evaluates_every_coalition_once() {
        let players = [0, 1, 2, 3, 4];
        let mut game = TableGame::random(&players, 9);
        shapley_exact(&mut game, &players).unwrap();
        assert_eq!(game.eval_count(), 1 << 5);
    }

    #[test]
    fn exact_respects_player_guard() {
        let players: Vec<usize> = (0..3).collect();
        let mut game = TableGame::random(&players, 0);
        assert!(matches!(
            shapley_exact_with_limit(&mut game, &players, 2),
            Err(AttributionError::TooManyPlayers { m: 3, max: 2 })
        ));
    }

    #[test]
    fn cis_closed_form_and_call_count() {
        let mut values = HashMap::new();
        values.insert(0b01u128, 1.0);
        values.insert(0b10, 2.0);
        values.insert(0b11, 4.0);
        let mut game = TableGame::new(values);
        let cis = cis_value(&mut game, &[0, 1]).unwrap();
        assert_relative_eq!(cis[0], 1.5, epsilon = 1e-12);
        assert_relative_eq!(cis[1], 2.5, epsilon = 1e-12);
        assert_eq!(game.eval_count(), 3); // M + 1
    }

    #[test]
    fn cis_single_player_is_grand_value() {
        let mut values = HashMap::new();
        values.insert(0b1u128, 7.5);
        let mut game = TableGame::new(values);
        let cis = cis_value(&mut game, &[0]).unwrap();
        assert_relative_eq!(cis[0], 7.5);
    }

    #[test]
    fn mc_exhaustive_equals_exact() {
        let players = [0, 1, 2];
        let mut game = TableGame::random(&players, 4);
        let exact = shapley_exact(&mut game, &players).unwrap();
        // budget covers all 3! permutations -> exhaustive enumeration
        let mut game2 = TableGame::random(&players, 4);
        let mc = shapley_mc(&mut game2, &players, 6, 123).unwrap();
        for (a, b) in mc.iter().zip(&exact) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn mc_additive_is_exact_for_any_seed() {
        let weights = [2.0, -0.5];
        for seed in [0, 1, 99] {
            let mut game = TableGame::additive(&[0, 1], &weights);
            let mc = shapley_mc(&mut game, &[0, 1], 3, seed).unwrap();
            assert_relative_eq!(mc[0], 2.0, epsilon = 1e-12);
            assert_relative_eq!(mc[1], -0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn mc_is_deterministic_given_seed() {
        let players = [0, 1, 2, 3, 4];
        let mut g1 = TableGame::random(&players, 2);
        let mut g2 = TableGame::random(&players, 2);
        // budget below 5! forces sampling
        let a = shapley_mc(&mut g1, &players, 50, 7).unwrap();
        let b = shapley_mc(&mut g2, &players, 50, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scores_json_round_trip() {
        let scores = ImportanceScores {
            method: ImportanceMethod::Shapg,
            char_fn: Some(CfMethod::SamplePerf),
            seed: 5,
            feature_names: vec!["a".into(), "b".into()],
            scores: vec![0.25, 1.5],
            per_sample: None,
            eval_count: 42,
        };
        let text = scores.to_json_string();
        let back = ImportanceScores::from_json_str(&text).unwrap();
        assert_eq!(back.method, ImportanceMethod::Shapg);
        assert_eq!(back.char_fn, Some(CfMethod::SamplePerf));
        assert_eq!(back.feature_names, scores.feature_names);
        assert_eq!(back.scores, scores.scores);
        assert_eq!(back.eval_count, 42);
        // ranks: b (1.5) first, then a
        assert_eq!(scores.ranks(), vec![2, 1]);
    }
}
