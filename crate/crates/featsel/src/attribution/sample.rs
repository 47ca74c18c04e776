//! Global importance from sample-level games: one characteristic function per
//! selected observation, attributions run independently (in parallel), then
//! aggregated across observations.

use rayon::prelude::*;

use super::graph::FeatureGraph;
use super::{
    cis_value, shapg, shapley_exact_with_limit, AttributionError, ImportanceMethod,
    ImportanceScores, DEFAULT_MAX_EXACT_PLAYERS,
};
use crate::dataset::{Dataset, ReferenceVector};
use crate::game::{aggregate_sample_scores, CfContext, CfMethod, CharacteristicFunction, CoalitionEval};
use crate::models::Model;

/// Which coalition-game attribution to run per observation.
#[derive(Debug, Clone)]
pub enum CoalitionMethod<'g> {
    Shapley { max_players: usize },
    Cis,
    Shapg { graph: &'g FeatureGraph, l_threshold: usize, mc_perms: usize },
}

impl CoalitionMethod<'_> {
    pub fn shapley() -> Self {
        CoalitionMethod::Shapley { max_players: DEFAULT_MAX_EXACT_PLAYERS }
    }

    fn tag(&self) -> ImportanceMethod {
        match self {
            CoalitionMethod::Shapley { .. } => ImportanceMethod::Shapley,
            CoalitionMethod::Cis => ImportanceMethod::Cis,
            CoalitionMethod::Shapg { .. } => ImportanceMethod::Shapg,
        }
    }
}

/// Runs the chosen attribution once per selected observation and aggregates:
/// mean absolute score for model-output games, plain mean for
/// performance-based games. Observations run on parallel workers, each with
/// its own evaluator cache and an RNG stream of `seed ⊕ observation_index`;
/// aggregation always walks observations in sample order.
pub fn importance_over_sample(
    method: &CoalitionMethod<'_>,
    cf_method: CfMethod,
    model: &Model,
    data: &Dataset,
    indices: &[usize],
    reference: &ReferenceVector,
    seed: u64,
) -> Result<ImportanceScores, AttributionError> {
    if indices.is_empty() {
        return Err(AttributionError::InvalidParam("sample must be non-empty".into()));
    }
    if !cf_method.is_sample_level() {
        return Err(AttributionError::InvalidParam(
            "importance_over_sample needs a sample-level characteristic function".into(),
        ));
    }
    let players: Vec<usize> = (0..data.m()).collect();

    let per_obs: Vec<(Vec<f64>, u64)> = indices
        .par_iter()
        .map(|&row| {
            let context =
                CfContext::Observation { x: data.row(row), y: data.target().values[row] };
            let mut cf = CharacteristicFunction::new(cf_method, model, reference, context)?;
            let obs_seed = seed ^ row as u64;
            let scores = match method {
                CoalitionMethod::Shapley { max_players } => {
                    shapley_exact_with_limit(&mut cf, &players, *max_players)?
                }
                CoalitionMethod::Cis => cis_value(&mut cf, &players)?,
                CoalitionMethod::Shapg { graph, l_threshold, mc_perms } => {
                    shapg(&mut cf, graph, *l_threshold, *mc_perms, obs_seed)?
                }
            };
            Ok((scores, cf.eval_count()))
        })
        .collect::<Result<_, AttributionError>>()?;

    let per_sample: Vec<Vec<f64>> = per_obs.iter().map(|(s, _)| s.clone()).collect();
    let eval_count = per_obs.iter().map(|(_, c)| c).sum();
    let scores = aggregate_sample_scores(&per_sample, cf_method);

    Ok(ImportanceScores {
        method: method.tag(),
        char_fn: Some(cf_method),
        seed,
        feature_names: data.feature_names(),
        scores,
        per_sample: Some(per_sample),
        eval_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{compute_reference_vector, ColumnData, FeatureColumn, NumericStrategy, TargetColumn, TaskKind};
    use crate::models::RidgeModel;
    use approx::assert_relative_eq;

    fn linear_dataset() -> (Dataset, Model) {
        let x0: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let x1: Vec<f64> = (0..8).map(|i| ((i * 3) % 5) as f64).collect();
        let y: Vec<f64> = x0.iter().zip(&x1).map(|(a, b)| 2.0 * a - b).collect();
        let d = Dataset::new(
            vec![
                FeatureColumn { name: "x0".into(), data: ColumnData::Numeric(x0) },
                FeatureColumn { name: "x1".into(), data: ColumnData::Numeric(x1) },
            ],
            TargetColumn { name: "y".into(), values: y },
            TaskKind::Regression,
        )
        .unwrap();
        let model =
            Model::Ridge(RidgeModel::fit(&d.rows(), &d.target().values, 0.0).unwrap());
        (d, model)
    }

    #[test]
    fn single_observation_matches_per_observation_scores() {
        let (d, model) = linear_dataset();
        let r = compute_reference_vector(&d, NumericStrategy::Mean);
        let result = importance_over_sample(
            &CoalitionMethod::shapley(),
            CfMethod::ModelOutput,
            &model,
            &d,
            &[3],
            &r,
            0,
        )
        .unwrap();
        let per = result.per_sample.as_ref().unwrap();
        assert_eq!(per.len(), 1);
        for (agg, raw) in result.scores.iter().zip(&per[0]) {
            assert_relative_eq!(*agg, raw.abs(), epsilon = 1e-12);
        }
    }

    #[test]
    fn duplicated_observations_leave_aggregate_unchanged() {
        let (d, model) = linear_dataset();
        let r = compute_reference_vector(&d, NumericStrategy::Mean);
        let once = importance_over_sample(
            &CoalitionMethod::Cis,
            CfMethod::SamplePerf,
            &model,
            &d,
            &[1, 4],
            &r,
            0,
        )
        .unwrap();
        let doubled = importance_over_sample(
            &CoalitionMethod::Cis,
            CfMethod::SamplePerf,
            &model,
            &d,
            &[1, 4, 1, 4],
            &r,
            0,
        )
        .unwrap();
        for (a, b) in once.scores.iter().zip(&doubled.scores) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn per_sample_matrix_has_sample_shape() {
        let (d, model) = linear_dataset();
        let r = compute_reference_vector(&d, NumericStrategy::Mean);
        let result = importance_over_sample(
            &CoalitionMethod::shapley(),
            CfMethod::SamplePerf,
            &model,
            &d,
            &[0, 2, 5],
            &r,
            9,
        )
        .unwrap();
        let per = result.per_sample.as_ref().unwrap();
        assert_eq!(per.len(), 3);
        assert!(per.iter().all(|row| row.len() == 2));
        // exact shapley on 2 players costs 4 coalitions per observation
        assert_eq!(result.eval_count, 12);
    }

    #[test]
    fn global_perf_is_rejected_here() {
        let (d, model) = linear_dataset();
        let r = compute_reference_vector(&d, NumericStrategy::Mean);
        let err = importance_over_sample(
            &CoalitionMethod::Cis,
            CfMethod::GlobalPerf(crate::game::Metric::R2),
            &model,
            &d,
            &[0],
            &r,
            0,
        );
        assert!(matches!(err, Err(AttributionError::InvalidParam(_))));
    }
}
