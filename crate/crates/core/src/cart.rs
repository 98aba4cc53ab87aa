//! CART regression trees grown by greedy SSE reduction.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until the leaf-size limit stops it.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features examined per split; `None` examines all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: Some(4),
            min_leaf: 20,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub dim: usize,
    pub threshold: f64,
    /// Rows with `x[dim] <= threshold`.
    pub left: Box<TreeNode>,
    pub right: Box<TreeNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub mean: f64,
    pub count: usize,
    pub sse: f64,
    pub split: Option<Split>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        while let Some(s) = &node.split {
            node = if x[s.dim] <= s.threshold { &s.left } else { &s.right };
        }
        node.mean
    }

    pub fn depth(&self) -> usize {
        match &self.split {
            None => 0,
            Some(s) => 1 + s.left.depth().max(s.right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<&TreeNode> {
        match &self.split {
            None => vec![self],
            Some(s) => {
                let mut v = s.left.leaves();
                v.extend(s.right.leaves());
                v
            }
        }
    }

    /// Sum of squared errors over all leaves.
    pub fn leaf_sse(&self) -> f64 {
        self.leaves().iter().map(|l| l.sse).sum()
    }
}

struct Candidate {
    dim: usize,
    threshold: f64,
    gain: f64,
}

/// Fits a tree on the row-major feature matrix `x`.
///
/// Candidate thresholds are midpoints between consecutive distinct values.
/// The split with the largest SSE reduction wins; ties keep the earlier
/// (dimension, threshold) pair.
pub fn fit<R: Rng>(x: &[Vec<f64>], y: &[f64], params: &TreeParams, rng: &mut R) -> TreeNode {
    assert_eq!(x.len(), y.len(), "feature and target lengths differ");
    let rows: Vec<usize> = (0..y.len()).collect();
    grow(x, y, rows, params, 0, rng)
}

/// Deterministic fit over all features.
pub fn fit_exhaustive(x: &[Vec<f64>], y: &[f64], params: &TreeParams) -> TreeNode {
    let mut unused = rand::rngs::mock::StepRng::new(0, 0);
    let params = TreeParams {
        max_features: None,
        ..*params
    };
    fit(x, y, &params, &mut unused)
}

fn node_stats(y: &[f64], rows: &[usize]) -> (f64, f64) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&i| y[i]).sum::<f64>() / n;
    let sse = rows.iter().map(|&i| (y[i] - mean).powi(2)).sum();
    (mean, sse)
}

fn grow<R: Rng>(
    x: &[Vec<f64>],
    y: &[f64],
    rows: Vec<usize>,
    params: &TreeParams,
    depth: usize,
    rng: &mut R,
) -> TreeNode {
    let (mean, sse) = node_stats(y, &rows);
    let mut node = TreeNode {
        mean,
        count: rows.len(),
        sse,
        split: None,
    };
    let min_leaf = params.min_leaf.max(1);
    if params.max_depth.is_some_and(|d| depth >= d) || rows.len() < 2 * min_leaf || sse <= 1e-12 {
        return node;
    }
    let n_features = x.first().map_or(0, Vec::len);
    let mut features: Vec<usize> = (0..n_features).collect();
    if let Some(k) = params.max_features {
        if k < n_features {
            features.shuffle(rng);
            features.truncate(k.max(1));
            features.sort_unstable();
        }
    }
    let Some(best) = best_split(x, y, &rows, &features, min_leaf, sse) else {
        return node;
    };
    let (left, right): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| x[i][best.dim] <= best.threshold);
    node.split = Some(Split {
        dim: best.dim,
        threshold: best.threshold,
        left: Box::new(grow(x, y, left, params, depth + 1, rng)),
        right: Box::new(grow(x, y, right, params, depth + 1, rng)),
    });
    node
}

fn best_split(
    x: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
    parent_sse: f64,
) -> Option<Candidate> {
    let n = rows.len();
    let total: f64 = rows.iter().map(|&i| y[i]).sum();
    let total_sq: f64 = rows.iter().map(|&i| y[i] * y[i]).sum();
    let mut best: Option<Candidate> = None;
    let mut order = rows.to_vec();
    for &dim in features {
        order.sort_by(|&a, &b| x[a][dim].total_cmp(&x[b][dim]));
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for k in 0..n - 1 {
            let yi = y[order[k]];
            left_sum += yi;
            left_sq += yi * yi;
            let n_left = k + 1;
            let n_right = n - n_left;
            let (lo, hi) = (x[order[k]][dim], x[order[k + 1]][dim]);
            if n_left < min_leaf || n_right < min_leaf || lo == hi {
                continue;
            }
            let right_sum = total - left_sum;
            let right_sq = total_sq - left_sq;
            let child_sse = (left_sq - left_sum * left_sum / n_left as f64)
                + (right_sq - right_sum * right_sum / n_right as f64);
            let gain = parent_sse - child_sse;
            let threshold = 0.5 * (lo + hi);
            if gain > 1e-12 && best.as_ref().map_or(true, |b| gain > b.gain + 1e-12 * parent_sse.max(1.0)) {
                best = Some(Candidate { dim, threshold, gain });
            }
        }
    }
    best
}
