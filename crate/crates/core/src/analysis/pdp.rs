use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runner::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpOptions {
    pub grid_size: usize,
    pub ice_subsample: usize,
    pub color_dim: Option<String>,
    pub seed: u64,
}

impl Default for PdpOptions {
    fn default() -> Self {
        PdpOptions {
            grid_size: 40,
            ice_subsample: 200,
            color_dim: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub dim: String,
    pub grid: Vec<f64>,
    pub pdp: Vec<f64>,
    pub ice: Vec<Vec<f64>>,
    pub instance_ids: Vec<usize>,
    pub color_dim: Option<String>,
    pub color_key: Option<Vec<f64>>,
}

/// `n` equally spaced values from `lower` to `upper` inclusive.
pub fn linspace(lower: f64, upper: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lower];
    }
    (0..n)
        .map(|g| if g + 1 == n { upper } else { lower + (upper - lower) * g as f64 / (n - 1) as f64 })
        .collect()
}

/// ICE curves of `f` over `grid` for each instance, and their mean.
pub fn ice_curves<F>(f: &F, instances: &[Vec<f64>], dim: usize, grid: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let ice: Vec<Vec<f64>> = instances
        .par_iter()
        .map(|x| {
            let mut point = x.clone();
            grid.iter()
                .map(|&v| {
                    point[dim] = v;
                    f(&point)
                })
                .collect()
        })
        .collect();
    let pdp = column_means(&ice, grid.len());
    (ice, pdp)
}

pub(crate) fn column_means(rows: &[Vec<f64>], width: usize) -> Vec<f64> {
    (0..width)
        .map(|g| rows.iter().map(|r| r[g]).sum::<f64>() / rows.len() as f64)
        .collect()
}

/// Configurations used as ICE instances: a seeded subsample, in config order.
pub fn ice_instances(ds: &Dataset, subsample: usize, seed: u64) -> Vec<(usize, Vec<f64>)> {
    let groups = ds.groups();
    let mut picked: Vec<usize> = if subsample >= groups.len() {
        (0..groups.len()).collect()
    } else {
        sample(&mut ChaCha8Rng::seed_from_u64(seed), groups.len(), subsample).into_vec()
    };
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| (groups[i].config_id, groups[i].params.0.clone()))
        .collect()
}

/// Partial dependence and ICE curves of `f` along `dim` over the dataset's space.
pub fn pdp_ice<F>(f: F, ds: &Dataset, dim: &str, opts: &PdpOptions) -> Result<CurveSet>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let index = ds
        .space
        .index_of(dim)
        .ok_or_else(|| Error::Precondition(format!("unknown dimension {dim}")))?;
    let color_index = match &opts.color_dim {
        Some(c) => Some(
            ds.space
                .index_of(c)
                .ok_or_else(|| Error::Precondition(format!("unknown colour dimension {c}")))?,
        ),
        None => None,
    };
    if opts.grid_size < 2 {
        return Err(Error::Precondition("PDP grid needs at least two points".into()));
    }
    if ds.is_empty() {
        return Err(Error::EmptyDesign);
    }
    let d = &ds.space.dims[index];
    let grid = linspace(d.lower, d.upper, opts.grid_size);
    let chosen = ice_instances(ds, opts.ice_subsample.max(1), opts.seed);
    let instances: Vec<Vec<f64>> = chosen.iter().map(|(_, x)| x.clone()).collect();
    let (ice, pdp) = ice_curves(&f, &instances, index, &grid);
    Ok(CurveSet {
        dim: dim.to_string(),
        grid,
        pdp,
        color_key: color_index.map(|c| instances.iter().map(|x| x[c]).collect()),
        color_dim: opts.color_dim.clone(),
        instance_ids: chosen.into_iter().map(|(id, _)| id).collect(),
        ice,
    })
}
