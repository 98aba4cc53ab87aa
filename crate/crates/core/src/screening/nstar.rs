use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runner::Dataset;
use crate::stats::sample_std;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub z: f64,
    pub epsilon: f64,
    pub config_ids: Vec<usize>,
    pub per_config_sigma: Vec<f64>,
    pub per_config_nstar: Vec<f64>,
    pub mean_nstar: f64,
    pub recommended_n: u64,
    /// The recommendation fell below one replicate.
    pub degenerate: bool,
}

/// Replicates needed for a margin of error `epsilon` at normal quantile `z`.
pub fn nstar(z: f64, sigma: f64, epsilon: f64) -> f64 {
    (z * sigma / epsilon).powi(2)
}

pub fn replication_from_sigmas(config_ids: Vec<usize>, sigmas: Vec<f64>, z: f64, epsilon: f64) -> Result<ReplicationReport> {
    if !(epsilon > 0.0) {
        return Err(Error::Precondition("epsilon must be positive".into()));
    }
    let per_config_nstar: Vec<f64> = sigmas.iter().map(|&s| nstar(z, s, epsilon)).collect();
    let mean_nstar = per_config_nstar.iter().sum::<f64>() / per_config_nstar.len().max(1) as f64;
    let recommended_n = mean_nstar.round() as u64;
    Ok(ReplicationReport {
        z,
        epsilon,
        config_ids,
        per_config_sigma: sigmas,
        per_config_nstar,
        mean_nstar,
        recommended_n,
        degenerate: recommended_n < 1,
    })
}

pub fn required_replicates(ds: &Dataset, z: f64, epsilon: f64) -> Result<ReplicationReport> {
    if ds.replicates() < 2 {
        return Err(Error::Precondition("replication sizing needs at least two replicates per config".into()));
    }
    let groups = ds.groups();
    let ids = groups.iter().map(|g| g.config_id).collect();
    let sigmas = groups.iter().map(|g| sample_std(&g.scores())).collect();
    replication_from_sigmas(ids, sigmas, z, epsilon)
}
