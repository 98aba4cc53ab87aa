//! Experimental parameter space and space-filling designs.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Short codes of the thirteen continuous levers, in canonical column order.
pub const LEVER_CODES: [&str; 13] = [
    "Gr", "PH", "PM", "PR", "BF", "BG", "BR", "BH", "BV", "FG", "FR", "FH", "FV",
];

/// Name of the sampling scheme written into design metadata.
pub const LHS_VARIANT: &str = "random-within-stratum";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dim {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub units: String,
}

impl Dim {
    pub fn new(name: &str, lower: f64, upper: f64, units: &str) -> Self {
        Dim {
            name: name.to_string(),
            lower,
            upper,
            units: units.to_string(),
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.lower && value <= self.upper
    }
}

/// Closed box of lever ranges plus the replicate seed levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub dims: Vec<Dim>,
    pub seed_levels: Vec<u64>,
}

impl ParameterSpace {
    pub fn new(dims: Vec<Dim>, seed_levels: Vec<u64>) -> Result<Self> {
        let space = ParameterSpace { dims, seed_levels };
        space.validate()?;
        Ok(space)
    }

    /// The full exploration box with seeds 1..=5.
    pub fn standard() -> Self {
        ParameterSpace {
            dims: vec![
                Dim::new("Gr", 10.0, 100.0, "%"),
                Dim::new("PH", 0.0, 100.0, "%"),
                Dim::new("PM", 50.0, 250.0, "E"),
                Dim::new("PR", 5.0, 25.0, "E/t"),
                Dim::new("BF", 2.0, 10.0, "E"),
                Dim::new("BG", 1.0, 20.0, "E"),
                Dim::new("BR", 8.0, 20.0, "E"),
                Dim::new("BH", 0.0, 100.0, "%"),
                Dim::new("BV", 0.0, 3.0, "cells"),
                Dim::new("FG", 10.0, 50.0, "E"),
                Dim::new("FR", 12.0, 30.0, "E"),
                Dim::new("FH", 0.0, 100.0, "%"),
                Dim::new("FV", 0.0, 3.0, "cells"),
            ],
            seed_levels: vec![1, 2, 3, 4, 5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::InvalidSpace("no dimensions".into()));
        }
        let mut seen = HashSet::new();
        for d in &self.dims {
            if !LEVER_CODES.contains(&d.name.as_str()) {
                return Err(Error::InvalidSpace(format!("unknown lever code {:?}", d.name)));
            }
            if !seen.insert(d.name.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate dimension {}", d.name)));
            }
            if !(d.lower.is_finite() && d.upper.is_finite() && d.lower < d.upper) {
                return Err(Error::InvalidSpace(format!(
                    "dimension {} needs lower < upper, got [{}, {}]",
                    d.name, d.lower, d.upper
                )));
            }
        }
        if self.seed_levels.is_empty() {
            return Err(Error::InvalidSpace("no seed levels".into()));
        }
        let distinct: HashSet<_> = self.seed_levels.iter().collect();
        if distinct.len() != self.seed_levels.len() {
            return Err(Error::InvalidSpace("seed levels are not distinct".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.dims.iter().map(|d| d.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    pub fn dim(&self, name: &str) -> Option<&Dim> {
        self.dims.iter().find(|d| d.name == name)
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.dims.iter().map(|d| (d.lower, d.upper)).collect()
    }

    pub fn contains(&self, point: &ParamVector) -> bool {
        point.0.len() == self.dims.len()
            && self.dims.iter().zip(&point.0).all(|(d, &v)| d.contains(v))
    }
}

/// One value per dimension, in the space's dimension order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, space: &ParameterSpace, name: &str) -> Option<f64> {
        space.index_of(name).map(|i| self.0[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub space: ParameterSpace,
    pub points: Vec<ParamVector>,
    pub seeds: Vec<u64>,
    pub design_seed: u64,
}

impl Design {
    pub fn replicates_per_point(&self) -> usize {
        self.seeds.len()
    }

    pub fn rows(&self) -> Vec<DesignRow> {
        expand_replicates(self, &self.seeds)
    }
}

/// One simulation request: a design point paired with a replicate seed.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    pub config_id: usize,
    pub params: ParamVector,
    pub seed: u64,
}

/// Random Latin hypercube over `space` with `n` points.
///
/// Each column is an independent permutation of the `n` strata with a
/// uniform offset inside the stratum. The design inherits the space's seed
/// levels as its replicate seeds.
pub fn lhs_sample(space: &ParameterSpace, n: usize, design_seed: u64) -> Result<Design> {
    space.validate()?;
    if n == 0 {
        return Err(Error::Precondition("LHS needs at least one point".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(design_seed);
    let mut columns = Vec::with_capacity(space.len());
    let mut strata: Vec<usize> = (0..n).collect();
    for dim in &space.dims {
        strata.shuffle(&mut rng);
        let column: Vec<f64> = strata
            .iter()
            .map(|&s| {
                let u: f64 = rng.gen();
                let v = dim.lower + (s as f64 + u) / n as f64 * dim.width();
                v.clamp(dim.lower, dim.upper)
            })
            .collect();
        columns.push(column);
    }
    let points = (0..n)
        .map(|i| ParamVector(columns.iter().map(|c| c[i]).collect()))
        .collect();
    Ok(Design {
        space: space.clone(),
        points,
        seeds: space.seed_levels.clone(),
        design_seed,
    })
}

/// Cartesian product points × seeds in config-major order.
pub fn expand_replicates(design: &Design, seeds: &[u64]) -> Vec<DesignRow> {
    design
        .points
        .iter()
        .enumerate()
        .flat_map(|(config_id, p)| {
            seeds.iter().map(move |&seed| DesignRow {
                config_id,
                params: p.clone(),
                seed,
            })
        })
        .collect()
}

/// A narrowed range for one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clip {
    pub dim: String,
    pub lower: f64,
    pub upper: f64,
}

impl Clip {
    pub fn new(dim: &str, lower: f64, upper: f64) -> Self {
        Clip {
            dim: dim.to_string(),
            lower,
            upper,
        }
    }
}

/// Returns a copy of `space` with the clipped dimensions narrowed.
pub fn refine_space(space: &ParameterSpace, clips: &[Clip]) -> Result<ParameterSpace> {
    let mut refined = space.clone();
    for clip in clips {
        let dim = refined
            .dims
            .iter_mut()
            .find(|d| d.name == clip.dim)
            .ok_or_else(|| Error::InvalidSpace(format!("clip names unknown dimension {}", clip.dim)))?;
        let orig = space.dim(&clip.dim).expect("dimension exists in source space");
        if !(clip.lower >= orig.lower && clip.upper <= orig.upper && clip.lower < clip.upper) {
            return Err(Error::InvalidClip {
                dim: clip.dim.clone(),
                lower: clip.lower,
                upper: clip.upper,
                orig_lower: orig.lower,
                orig_upper: orig.upper,
            });
        }
        dim.lower = clip.lower;
        dim.upper = clip.upper;
    }
    Ok(refined)
}
