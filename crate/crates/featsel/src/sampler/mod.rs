//! Diversity sampling: k-means++ clustering for global coverage, then
//! evenly-spaced distance-ranked selection inside each cluster for local
//! coverage. The selected subset always has exactly the requested size.

mod kmeans;

pub use kmeans::{kmeans_pp, Clustering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;

/// Default sample size when the pipeline gate triggers sampling.
pub const DEFAULT_SAMPLE_SIZE: usize = 2048;
/// Lloyd iteration cap used by [`diversity_sample`].
pub const DEFAULT_MAX_ITERS: usize = 100;
/// Center-shift tolerance used by [`diversity_sample`].
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("k = {k} exceeds the number of observations n = {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("sample size s = {s} exceeds the number of observations n = {n}")]
    SampleTooLarge { s: usize, n: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Per-cluster bookkeeping of a diversity sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterSelection {
    pub cluster: usize,
    /// The allocation s_i this cluster received from the split rule.
    pub allocated: usize,
    /// Ranks (0 = closest to center) finally chosen, including any
    /// redistributed extras.
    pub chosen_ranks: Vec<usize>,
}

/// The selected observation subset: original row ids plus how each cluster
/// contributed.
#[derive(Debug, Clone)]
pub struct SampleIndices {
    pub seed: u64,
    pub s: usize,
    pub k: usize,
    pub indices: Vec<usize>,
    pub per_cluster: Vec<ClusterSelection>,
}

impl SampleIndices {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "seed": self.seed,
            "s": self.s,
            "k": self.k,
            "indices": self.indices,
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("sample serializes")
    }
}

/// Split s selections over k clusters: the first `s mod k` clusters get
/// `floor(s/k) + 1`, the rest `floor(s/k)`.
pub fn allocate_per_cluster(s: usize, k: usize) -> Vec<usize> {
    let base = s / k;
    let extra = s % k;
    (0..k).map(|i| if i < extra { base + 1 } else { base }).collect()
}

/// Row ids of one cluster ordered by increasing distance to the center;
/// distance ties break toward the lower original row index.
pub fn rank_by_center_distance(
    points: &[Vec<f64>],
    row_ids: &[usize],
    center: &[f64],
) -> Vec<usize> {
    let mut order: Vec<(usize, f64)> = row_ids
        .iter()
        .zip(points)
        .map(|(&id, p)| {
            let d: f64 = p.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum();
            (id, d)
        })
        .collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    order.into_iter().map(|(id, _)| id).collect()
}

/// Population z-score per column; zero-variance columns are dropped from the
/// distance computation entirely.
fn z_scored_rows(d: &Dataset) -> Vec<Vec<f64>> {
    let n = d.n();
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for col in d.columns() {
        let values: Vec<f64> = (0..n).map(|i| col.value(i)).collect();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        if var > 0.0 {
            let std = var.sqrt();
            kept.push(values.into_iter().map(|v| (v - mean) / std).collect());
        }
    }
    (0..n).map(|i| kept.iter().map(|c| c[i]).collect()).collect()
}

/// Selects exactly `s` representative rows. Clustering runs on z-scored
/// columns with `k = floor(sqrt(s))` by default. Within each cluster, ranks
/// `{j * Δ}` are taken with stride `Δ = max(1, floor(|C|/s_i))`; shortfall
/// from undersized clusters or stride truncation is redistributed round-robin
/// to clusters that still have unselected points, largest first, lowest
/// unchosen ranks first.
pub fn diversity_sample(
    d: &Dataset,
    s: usize,
    k: Option<usize>,
    seed: u64,
) -> Result<SampleIndices, SamplerError> {
    let n = d.n();
    if s == 0 {
        return Err(SamplerError::InvalidParam("sample size must be >= 1".into()));
    }
    if s > n {
        return Err(SamplerError::SampleTooLarge { s, n });
    }
    let k = k.unwrap_or_else(|| (s as f64).sqrt().floor() as usize).clamp(1, n);

    let rows = z_scored_rows(d);
    let clustering = kmeans_pp(&rows, k, seed, DEFAULT_MAX_ITERS, DEFAULT_TOL)?;

    // cluster membership in original row order
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (row, &c) in clustering.assignment.iter().enumerate() {
        members[c].push(row);
    }

    // distance-ranked row ids per cluster
    let ranked: Vec<Vec<usize>> = members
        .iter()
        .enumerate()
        .map(|(c, ids)| {
            let pts: Vec<Vec<f64>> = ids.iter().map(|&i| rows[i].clone()).collect();
            rank_by_center_distance(&pts, ids, &clustering.centers[c])
        })
        .collect();

    let allocation = allocate_per_cluster(s, k);
    let mut chosen: Vec<Vec<bool>> = ranked.iter().map(|r| vec![false; r.len()]).collect();
    let mut total = 0usize;
    for (c, &s_i) in allocation.iter().enumerate() {
        if s_i == 0 || ranked[c].is_empty() {
            continue;
        }
        let size = ranked[c].len();
        let stride = (size / s_i).max(1);
        for j in 0..s_i {
            let rank = j * stride;
            if rank < size {
                chosen[c][rank] = true;
                total += 1;
            }
        }
    }

    // round-robin redistribution of any shortfall: largest clusters first,
    // lowest unchosen ranks first
    if total < s {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| ranked[b].len().cmp(&ranked[a].len()).then(a.cmp(&b)));
        let mut next_rank: Vec<usize> = vec![0; k];
        while total < s {
            let mut progressed = false;
            for &c in &order {
                if total >= s {
                    break;
                }
                while next_rank[c] < ranked[c].len() && chosen[c][next_rank[c]] {
                    next_rank[c] += 1;
                }
                if next_rank[c] < ranked[c].len() {
                    chosen[c][next_rank[c]] = true;
                    total += 1;
                    progressed = true;
                }
            }
            debug_assert!(progressed, "redistribution stalled below s <= n");
            if !progressed {
                break;
            }
        }
    }

    let mut indices = Vec::with_capacity(s);
    let mut per_cluster = Vec::with_capacity(k);
    for c in 0..k {
        let ranks: Vec<usize> =
            (0..ranked[c].len()).filter(|&r| chosen[c][r]).collect();
        indices.extend(ranks.iter().map(|&r| ranked[c][r]));
        per_cluster.push(ClusterSelection { cluster: c, allocated: allocation[c], chosen_ranks: ranks });
    }

    Ok(SampleIndices { seed, s, k, indices, per_cluster })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ColumnData, FeatureColumn, TargetColumn, TaskKind};
    use crate::rng::stream_rng;
    use rand::Rng;

    fn dataset_from_rows(rows: &[Vec<f64>]) -> Dataset {
        let m = rows[0].len();
        let columns = (0..m)
            .map(|j| FeatureColumn {
                name: format!("f{j}"),
                data: ColumnData::Numeric(rows.iter().map(|r| r[j]).collect()),
            })
            .collect();
        Dataset::new(
            columns,
            TargetColumn { name: "y".into(), values: vec![0.0; rows.len()] },
            TaskKind::Regression,
        )
        .unwrap()
    }

    fn random_dataset(n: usize, m: usize, seed: u64) -> Dataset {
        let mut rng = stream_rng(seed, "test/sampler-data");
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        dataset_from_rows(&rows)
    }

    #[test]
    fn allocation_formula_cases() {
        assert_eq!(allocate_per_cluster(10, 3), vec![4, 3, 3]);
        assert_eq!(allocate_per_cluster(6, 3), vec![2, 2, 2]);
        assert_eq!(allocate_per_cluster(2, 5), vec![1, 1, 0, 0, 0]);
    }

    #[test]
    fn allocation_always_sums_to_s() {
        for s in 1..=100 {
            for k in 1..=100 {
                assert_eq!(allocate_per_cluster(s, k).iter().sum::<usize>(), s);
            }
        }
    }

    #[test]
    fn ranking_sorts_by_distance_with_index_ties() {
        // distances [3, 1, 2] -> ids [1, 2, 0]
        let points = vec![vec![3.0], vec![1.0], vec![2.0]];
        let ids = vec![0, 1, 2];
        assert_eq!(rank_by_center_distance(&points, &ids, &[0.0]), vec![1, 2, 0]);

        // equidistant points keep the lower original index first
        let points = vec![vec![1.0], vec![-1.0]];
        let ids = vec![4, 7];
        assert_eq!(rank_by_center_distance(&points, &ids, &[0.0]), vec![4, 7]);

        // singleton
        assert_eq!(rank_by_center_distance(&[vec![9.0]], &[3], &[0.0]), vec![3]);
    }

    #[test]
    fn stride_selection_takes_evenly_spaced_ranks() {
        // one tight 1-D line so a single cluster holds all 10 points
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let d = dataset_from_rows(&rows);
        let sample = diversity_sample(&d, 3, Some(1), 0).unwrap();
        // |C| = 10, s_i = 3 -> stride 3 -> ranks {0, 3, 6}
        assert_eq!(sample.per_cluster[0].chosen_ranks, vec![0, 3, 6]);
        assert_eq!(sample.indices.len(), 3);
    }

    #[test]
    fn sample_size_is_exact_for_all_s() {
        let d = random_dataset(57, 3, 5);
        for s in 1..=57 {
            let sample = diversity_sample(&d, s, None, 9).unwrap();
            assert_eq!(sample.indices.len(), s, "wrong size at s = {s}");
            let mut sorted = sample.indices.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), s, "duplicates at s = {s}");
        }
    }

    #[test]
    fn s_equals_n_selects_every_row() {
        let d = random_dataset(24, 2, 3);
        let sample = diversity_sample(&d, 24, Some(4), 1).unwrap();
        let mut sorted = sample.indices.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..24).collect::<Vec<_>>());
    }

    #[test]
    fn rank_zero_selected_in_every_allocated_cluster() {
        let d = random_dataset(80, 4, 7);
        let sample = diversity_sample(&d, 20, Some(5), 2).unwrap();
        for pc in &sample.per_cluster {
            if pc.allocated >= 1 && !pc.chosen_ranks.is_empty() {
                assert!(pc.chosen_ranks.contains(&0), "cluster {} misses rank 0", pc.cluster);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let d = random_dataset(60, 3, 11);
        let a = diversity_sample(&d, 17, None, 21).unwrap();
        let b = diversity_sample(&d, 17, None, 21).unwrap();
        assert_eq!(a.indices, b.indices);
    }

    #[test]
    fn sample_too_large_is_an_error() {
        let d = random_dataset(5, 2, 0);
        assert!(matches!(
            diversity_sample(&d, 6, None, 0),
            Err(SamplerError::SampleTooLarge { s: 6, n: 5 })
        ));
    }

    #[test]
    fn constant_columns_are_handled() {
        // all-constant data: distances vanish, ordering falls back to row ids
        let rows: Vec<Vec<f64>> = (0..8).map(|_| vec![2.0, 2.0]).collect();
        let d = dataset_from_rows(&rows);
        let sample = diversity_sample(&d, 3, Some(2), 0).unwrap();
        assert_eq!(sample.indices.len(), 3);
    }

    #[test]
    fn clustering_invariant_under_column_rescaling() {
        let d = random_dataset(40, 3, 13);
        let scaled_rows: Vec<Vec<f64>> = (0..d.n())
            .map(|i| {
                let r = d.row(i);
                vec![r[0] * 100.0 - 7.0, r[1], r[2] * 0.001 + 3.0]
            })
            .collect();
        let scaled = dataset_from_rows(&scaled_rows);
        let a = diversity_sample(&d, 12, Some(3), 4).unwrap();
        let b = diversity_sample(&scaled, 12, Some(3), 4).unwrap();
        assert_eq!(a.indices, b.indices);
    }

    #[test]
    fn json_artifact_shape() {
        let d = random_dataset(10, 2, 1);
        let sample = diversity_sample(&d, 4, Some(2), 6).unwrap();
        let v = sample.to_json();
        assert_eq!(v["seed"], 6);
        assert_eq!(v["s"], 4);
        assert_eq!(v["k"], 2);
        assert_eq!(v["indices"].as_array().unwrap().len(), 4);
    }
}
