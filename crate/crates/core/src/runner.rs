//! Parallel execution of replicated designs.

use std::collections::{BTreeMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{run_simulation, Levers, Outcome, Regime, SimTemplate};
use crate::space::{DesignRow, ParamVector, ParameterSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config_id: usize,
    pub seed: u64,
    pub params: ParamVector,
    pub outcome: Outcome,
    pub wall_time: Duration,
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub design_seed: Option<u64>,
    pub seeds: Vec<u64>,
    pub sim: SimTemplate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub space: ParameterSpace,
    pub records: Vec<RunRecord>,
    pub meta: DatasetMeta,
}

/// All replicates of one design point.
#[derive(Debug, Clone)]
pub struct ConfigGroup<'a> {
    pub config_id: usize,
    pub params: &'a ParamVector,
    pub runs: Vec<&'a RunRecord>,
}

impl ConfigGroup<'_> {
    pub fn scores(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.outcome.score()).collect()
    }

    pub fn labels(&self) -> Vec<Regime> {
        self.runs.iter().map(|r| r.outcome.label).collect()
    }

    pub fn mean_score(&self) -> f64 {
        self.scores().iter().sum::<f64>() / self.runs.len() as f64
    }
}

impl Dataset {
    pub fn new(space: ParameterSpace, mut records: Vec<RunRecord>, meta: DatasetMeta) -> Result<Self> {
        records.sort_by_key(|r| (r.config_id, r.seed));
        let ds = Dataset { space, records, meta };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let mut keys = HashSet::new();
        for r in &self.records {
            if !keys.insert((r.config_id, r.seed)) {
                return Err(Error::Precondition(format!(
                    "duplicate run (config {}, seed {})",
                    r.config_id, r.seed
                )));
            }
            if !self.space.contains(&r.params) {
                return Err(Error::Precondition(format!(
                    "config {} lies outside the parameter space",
                    r.config_id
                )));
            }
        }
        let counts: HashSet<usize> = self.groups().iter().map(|g| g.runs.len()).collect();
        if counts.len() > 1 {
            return Err(Error::Precondition(format!(
                "unbalanced replicates: per-config counts {counts:?}"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Runs grouped by configuration, in config_id order.
    pub fn groups(&self) -> Vec<ConfigGroup<'_>> {
        let mut map: BTreeMap<usize, ConfigGroup<'_>> = BTreeMap::new();
        for r in &self.records {
            map.entry(r.config_id)
                .or_insert_with(|| ConfigGroup {
                    config_id: r.config_id,
                    params: &r.params,
                    runs: Vec::new(),
                })
                .runs
                .push(r);
        }
        map.into_values().collect()
    }

    pub fn replicates(&self) -> usize {
        self.groups().first().map_or(0, |g| g.runs.len())
    }

    pub fn seeds(&self) -> Vec<u64> {
        let set: std::collections::BTreeSet<u64> = self.records.iter().map(|r| r.seed).collect();
        set.into_iter().collect()
    }

    /// Fraction of runs ending in each regime, in class order.
    pub fn class_shares(&self) -> [f64; 3] {
        let mut counts = [0usize; 3];
        for r in &self.records {
            counts[r.outcome.label.index()] += 1;
        }
        let n = self.records.len().max(1) as f64;
        counts.map(|c| c as f64 / n)
    }

    /// Keeps only the listed configurations.
    pub fn subset(&self, config_ids: &HashSet<usize>) -> Dataset {
        Dataset {
            space: self.space.clone(),
            records: self
                .records
                .iter()
                .filter(|r| config_ids.contains(&r.config_id))
                .cloned()
                .collect(),
            meta: self.meta.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub runs: usize,
    pub workers: usize,
    pub total_run_time: Duration,
    pub mean_run_time: Duration,
    pub elapsed: Duration,
}

/// Progress callback: (finished, total).
pub type Progress<'a> = &'a (dyn Fn(usize, usize) + Sync);

/// Simulates every row on a pool of `workers` threads.
///
/// Records come back sorted by (config_id, seed), so the outcome columns do
/// not depend on the worker count.
pub fn run_batch(
    space: &ParameterSpace,
    rows: &[DesignRow],
    template: &SimTemplate,
    workers: usize,
    progress: Option<Progress<'_>>,
) -> Result<(Dataset, BatchSummary)> {
    if rows.is_empty() {
        return Err(Error::EmptyDesign);
    }
    if workers == 0 {
        return Err(Error::Precondition("workers must be at least 1".into()));
    }
    let configs = rows
        .iter()
        .map(|row| {
            let levers = Levers::from_params(space, &row.params)?;
            let cfg = template.config(levers, row.seed);
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?;
    let done = AtomicUsize::new(0);
    let started = Instant::now();
    let records: Vec<RunRecord> = pool.install(|| {
        rows.par_iter()
            .zip(configs.par_iter())
            .map(|(row, cfg)| {
                let t = Instant::now();
                let outcome = run_simulation(cfg);
                let wall_time = t.elapsed();
                let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Some(report) = progress {
                    report(finished, rows.len());
                }
                RunRecord {
                    config_id: row.config_id,
                    seed: row.seed,
                    params: row.params.clone(),
                    outcome,
                    wall_time,
                }
            })
            .collect()
    });
    let elapsed = started.elapsed();
    let total_run_time: Duration = records.iter().map(|r| r.wall_time).sum();
    let summary = BatchSummary {
        runs: records.len(),
        workers,
        total_run_time,
        mean_run_time: total_run_time / records.len() as u32,
        elapsed,
    };
    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let meta = DatasetMeta {
        design_seed: None,
        seeds,
        sim: template.clone(),
    };
    Ok((Dataset::new(space.clone(), records, meta)?, summary))
}
