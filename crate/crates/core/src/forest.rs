//! Bagged regression forests on top of the CART grower.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::{self, TreeNode, TreeParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features per split; `None` uses ceil(d / 3).
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            max_depth: None,
            min_leaf: 5,
            max_features: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<TreeNode>,
}

impl RandomForest {
    /// Each tree sees a bootstrap resample of the rows and draws its own
    /// feature subsets. Trees are grown in parallel from per-tree seeds.
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &ForestParams) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Precondition(format!(
                "forest needs matching non-empty inputs, got {} rows and {} targets",
                x.len(),
                y.len()
            )));
        }
        if params.n_trees == 0 {
            return Err(Error::Precondition("forest needs at least one tree".into()));
        }
        let d = x[0].len();
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            max_features: Some(params.max_features.unwrap_or(d.div_ceil(3)).max(1)),
        };
        let n = x.len();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(t as u64);
                let picks: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                let bx: Vec<Vec<f64>> = picks.iter().map(|&i| x[i].clone()).collect();
                let by: Vec<f64> = picks.iter().map(|&i| y[i]).collect();
                cart::fit(&bx, &by, &tree_params, &mut rng)
            })
            .collect();
        Ok(RandomForest { trees })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.gen()).collect()).collect();
        let y = x.iter().map(|r| 2.0 * r[0] + (r[1] * 3.0).sin()).collect();
        (x, y)
    }

    fn small() -> ForestParams {
        ForestParams {
            n_trees: 40,
            seed: 3,
            ..ForestParams::default()
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let (x, y) = data(200, 1);
        let a = RandomForest::fit(&x, &y, &small()).unwrap();
        let b = RandomForest::fit(&x, &y, &small()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn beats_the_mean_predictor_out_of_sample() {
        let (x, y) = data(400, 1);
        let (tx, ty) = data(200, 2);
        let f = RandomForest::fit(&x, &y, &small()).unwrap();
        let mean = ty.iter().sum::<f64>() / ty.len() as f64;
        let mse: f64 = tx.iter().zip(&ty).map(|(r, t)| (f.predict(r) - t).powi(2)).sum();
        let var: f64 = ty.iter().map(|t| (t - mean).powi(2)).sum();
        assert!(mse < 0.2 * var, "mse {mse} var {var}");
    }

    #[test]
    fn constant_target_is_reproduced() {
        let (x, _) = data(50, 1);
        let f = RandomForest::fit(&x, &vec![0.25; 50], &small()).unwrap();
        assert!((f.predict(&x[0]) - 0.25).abs() < 1e-12);
    }
}
