//! Feature graph for ShapG collaborator sets.
//!
//! A complete graph over features with pairwise cosine-distance weights is
//! pruned down to a target density, cutting edges of the least
//! target-correlated features first while never disconnecting the graph.

use crate::dataset::Dataset;

/// Weighted simple graph over the M features.
#[derive(Debug, Clone)]
pub struct FeatureGraph {
    m: usize,
    /// Symmetric cosine-distance matrix (kept for all pairs, present or not).
    weights: Vec<f64>,
    present: Vec<bool>,
    edge_count: usize,
    /// Ranking key for pruning order: |cosine similarity with the target|.
    /// Pruning walks nodes in ascending order of this key, so the least
    /// target-correlated features lose their edges first.
    node_importance: Vec<f64>,
}

impl FeatureGraph {
    /// Builds a graph from an explicit edge list, for callers that want a
    /// hand-picked collaborator structure instead of [`build_feature_graph`].
    /// Self-loops, duplicate edges, and out-of-range endpoints are ignored
    /// errors-by-construction: they panic in debug builds.
    pub fn from_edges(m: usize, edges: &[(usize, usize, f64)], node_importance: Vec<f64>) -> Self {
        let mut g = FeatureGraph {
            m,
            weights: vec![0.0; m * m],
            present: vec![false; m * m],
            edge_count: 0,
            node_importance,
        };
        for &(i, j, w) in edges {
            debug_assert!(i != j && i < m && j < m, "invalid edge ({i}, {j})");
            let a = g.idx(i, j);
            let b = g.idx(j, i);
            if !g.present[a] {
                g.present[a] = true;
                g.present[b] = true;
                g.edge_count += 1;
            }
            g.weights[a] = w;
            g.weights[b] = w;
        }
        g
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.m + j
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Number of unordered feature pairs, `M(M-1)/2`.
    pub fn pair_count(&self) -> usize {
        self.m * (self.m.saturating_sub(1)) / 2
    }

    /// |E| over M(M-1)/2; 0 for a single-node graph.
    pub fn density(&self) -> f64 {
        let pairs = self.pair_count();
        if pairs == 0 {
            0.0
        } else {
            self.edge_count as f64 / pairs as f64
        }
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.present[self.idx(i, j)]
    }

    /// Cosine distance between features i and j.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[self.idx(i, j)]
    }

    pub fn node_importance(&self) -> &[f64] {
        &self.node_importance
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.m).filter(|&j| self.has_edge(i, j)).collect()
    }

    /// The collaborator set of feature i: itself plus its neighbors, sorted.
    pub fn collaborator_set(&self, i: usize) -> Vec<usize> {
        let mut set = self.neighbors(i);
        set.push(i);
        set.sort_unstable();
        set
    }

    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for i in 0..self.m {
            for j in (i + 1)..self.m {
                if self.present[self.idx(i, j)] {
                    out.push((i, j, self.weights[self.idx(i, j)]));
                }
            }
        }
        out
    }

    fn remove_edge(&mut self, i: usize, j: usize) {
        let a = self.idx(i, j);
        let b = self.idx(j, i);
        debug_assert!(self.present[a]);
        self.present[a] = false;
        self.present[b] = false;
        self.edge_count -= 1;
    }

    fn restore_edge(&mut self, i: usize, j: usize) {
        let a = self.idx(i, j);
        let b = self.idx(j, i);
        self.present[a] = true;
        self.present[b] = true;
        self.edge_count += 1;
    }

    /// Breadth-first reachability from node 0. Single-node graphs count as
    /// connected.
    pub fn is_connected(&self) -> bool {
        if self.m <= 1 {
            return true;
        }
        let mut seen = vec![false; self.m];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for v in 0..self.m {
                if !seen[v] && self.has_edge(u, v) {
                    seen[v] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        reached == self.m
    }
}

/// Population z-score; zero-variance columns become all zeros.
fn z_score(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var == 0.0 {
        return vec![0.0; values.len()];
    }
    let std = var.sqrt();
    values.iter().map(|v| (v - mean) / std).collect()
}

/// Cosine similarity with the zero-norm convention of 0.
fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Complete feature graph: edge weights are pairwise cosine distances
/// (1 - cosine similarity) of the z-scored columns, node importance is the
/// absolute cosine similarity with the z-scored target.
pub fn complete_feature_graph(d: &Dataset) -> FeatureGraph {
    let m = d.m();
    let cols: Vec<Vec<f64>> = d
        .columns()
        .iter()
        .map(|c| z_score(&(0..d.n()).map(|i| c.value(i)).collect::<Vec<_>>()))
        .collect();
    let target = z_score(&d.target().values);

    let node_importance: Vec<f64> =
        cols.iter().map(|c| cosine_similarity(c, &target).abs()).collect();

    let mut weights = vec![0.0; m * m];
    let mut present = vec![false; m * m];
    let mut edge_count = 0;
    for i in 0..m {
        for j in (i + 1)..m {
            let w = 1.0 - cosine_similarity(&cols[i], &cols[j]);
            weights[i * m + j] = w;
            weights[j * m + i] = w;
            present[i * m + j] = true;
            present[j * m + i] = true;
            edge_count += 1;
        }
    }
    FeatureGraph { m, weights, present, edge_count, node_importance }
}

/// Complete graph pruned to a density of 1.5x the spanning-tree ratio 2/M,
/// capped at 1.0.
pub fn build_feature_graph(d: &Dataset) -> FeatureGraph {
    let g = complete_feature_graph(d);
    let m = g.m();
    if m < 2 {
        return g;
    }
    let target_density = (1.5 * 2.0 / m as f64).min(1.0);
    prune_graph(g, target_density)
}

/// Removes edges until `edge_count <= ceil(target_density * M(M-1)/2)`,
/// walking features in ascending node importance and each feature's incident
/// edges in descending weight. A removal that would disconnect the graph is
/// skipped, so the guard may leave the count above target.
pub fn prune_graph(mut g: FeatureGraph, target_density: f64) -> FeatureGraph {
    let budget = edge_budget(target_density, g.pair_count());

    let mut order: Vec<usize> = (0..g.m()).collect();
    order.sort_by(|&a, &b| {
        g.node_importance[a].total_cmp(&g.node_importance[b]).then(a.cmp(&b))
    });

    'outer: for &node in &order {
        if g.edge_count <= budget {
            break;
        }
        let mut incident: Vec<(usize, f64)> =
            g.neighbors(node).into_iter().map(|j| (j, g.weight(node, j))).collect();
        incident.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (nbr, _) in incident {
            if g.edge_count <= budget {
                break 'outer;
            }
            g.remove_edge(node, nbr);
            if !g.is_connected() {
                g.restore_edge(node, nbr);
            }
        }
    }
    g
}

/// `ceil(target * pairs)` with a small backoff so float noise on exact
/// rationals (like 3/M * M(M-1)/2) never bumps the budget up by one.
pub fn edge_budget(target_density: f64, pairs: usize) -> usize {
    ((target_density * pairs as f64) - 1e-9).ceil().max(0.0) as usize
}
