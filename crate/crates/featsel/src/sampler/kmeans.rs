//! k-means++ initialization and Lloyd iterations, deterministic given a seed.

use rand::Rng;

use super::SamplerError;
use crate::rng::stream_rng;

/// Result of a k-means run. `assignment[i]` is always the index of the
/// nearest center (ties to the lowest center index) and `inertia` is the
/// objective recomputed from the final centers and assignment.
#[derive(Debug, Clone)]
pub struct Clustering {
    pub centers: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest_center(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = dist2(point, &centers[0]);
    for (c, center) in centers.iter().enumerate().skip(1) {
        let d = dist2(point, center);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

/// D²-weighted center seeding.
fn seed_centers(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; n];

    let first = rng.gen_range(0..n);
    centers.push(points[first].clone());
    chosen[first] = true;

    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        } else {
            // all remaining mass is on duplicates of chosen centers; pick
            // uniformly among unchosen points
            let unchosen: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            unchosen[rng.gen_range(0..unchosen.len())]
        };
        chosen[next] = true;
        centers.push(points[next].clone());
        let newest = centers.last().unwrap();
        for (i, p) in points.iter().enumerate() {
            let d = dist2(p, newest);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centers
}

/// Lloyd iterations from a k-means++ start until the largest center shift
/// drops below `tol` or `max_iters` is reached. Empty clusters are re-seeded
/// with the point farthest from its assigned center.
pub fn kmeans_pp(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<Clustering, SamplerError> {
    let n = points.len();
    if k > n {
        return Err(SamplerError::KTooLarge { k, n });
    }
    if k == 0 {
        return Err(SamplerError::InvalidParam("k must be >= 1".into()));
    }
    if tol < 0.0 {
        return Err(SamplerError::InvalidParam(format!("tol must be >= 0, got {tol}")));
    }

    let dim = points[0].len();
    let mut rng = stream_rng(seed, "sampler/kmeans");
    let mut centers = seed_centers(points, k, &mut rng);

    for _ in 0..max_iters {
        let assignment: Vec<usize> = points.iter().map(|p| nearest_center(p, &centers).0).collect();

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, &x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }

        let mut new_centers = Vec::with_capacity(k);
        let mut empties = Vec::new();
        for c in 0..k {
            if counts[c] == 0 {
                empties.push(c);
                new_centers.push(centers[c].clone());
            } else {
                new_centers
                    .push(sums[c].iter().map(|s| s / counts[c] as f64).collect::<Vec<f64>>());
            }
        }
        // re-seed each empty cluster with the point currently farthest from
        // its own center, largest first
        if !empties.is_empty() {
            let mut by_distance: Vec<(usize, f64)> = points
                .iter()
                .enumerate()
                .map(|(i, p)| (i, dist2(p, &new_centers[assignment[i]])))
                .collect();
            by_distance.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for (slot, c) in empties.into_iter().enumerate() {
                new_centers[c] = points[by_distance[slot].0].clone();
            }
        }

        let shift = centers
            .iter()
            .zip(&new_centers)
            .map(|(a, b)| dist2(a, b).sqrt())
            .fold(0.0_f64, f64::max);
        centers = new_centers;
        if shift < tol {
            break;
        }
    }

    let mut assignment = Vec::with_capacity(n);
    let mut inertia = 0.0;
    for p in points {
        let (c, d) = nearest_center(p, &centers);
        assignment.push(c);
        inertia += d;
    }
    Ok(Clustering { centers, assignment, inertia })
}
