//! Permutation feature importance: the metric drop when one feature's column
//! is shuffled, averaged over several seeded shuffles.

use rand::seq::SliceRandom;

use super::{AttributionError, ImportanceMethod, ImportanceScores};
use crate::dataset::Dataset;
use crate::game::Metric;
use crate::models::Model;
use crate::rng::observation_rng;

/// Default shuffle repeats per feature.
pub const DEFAULT_PFI_REPEATS: usize = 5;

/// Positive scores mean important: `baseline - shuffled_metric` with the
/// metric oriented higher-is-better. The model and the evaluation dataset are
/// left untouched; shuffles happen on copies.
pub fn pfi(
    model: &Model,
    eval: &Dataset,
    metric: Metric,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceScores, AttributionError> {
    if repeats == 0 {
        return Err(AttributionError::InvalidParam("repeats must be >= 1".into()));
    }
    let n = eval.n();
    let m = eval.m();
    let rows = eval.rows();
    let targets = &eval.target().values;

    let baseline = metric.compute(&model.predict(&rows).map_err(crate::game::GameError::from)?, targets)?;

    let mut scores = vec![0.0; m];
    let mut shuffled = rows.clone();
    for feature in 0..m {
        let mut drop_sum = 0.0;
        for repeat in 0..repeats {
            let mut rng =
                observation_rng(seed, "attribution/pfi", (feature * repeats + repeat) as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            for (i, &src) in perm.iter().enumerate() {
                shuffled[i][feature] = rows[src][feature];
            }
            let degraded = metric.compute(
                &model.predict(&shuffled).map_err(crate::game::GameError::from)?,
                targets,
            )?;
            drop_sum += baseline - degraded;
        }
        scores[feature] = drop_sum / repeats as f64;
        for i in 0..n {
            shuffled[i][feature] = rows[i][feature];
        }
    }

    Ok(ImportanceScores {
        method: ImportanceMethod::Pfi,
        char_fn: None,
        seed,
        feature_names: eval.feature_names(),
        scores,
        per_sample: None,
        eval_count: (m * repeats + 1) as u64,
    })
}
