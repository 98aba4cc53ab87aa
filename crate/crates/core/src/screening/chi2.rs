use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runner::Dataset;
use crate::sim::Regime;
use crate::stats::chi2_sf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub chi2: f64,
    pub df: usize,
    pub p: f64,
    pub seeds: Vec<u64>,
    /// Rows follow `seeds`, columns the regimes that occur at least once.
    pub labels: Vec<Regime>,
    pub table: Vec<Vec<usize>>,
}

/// Pearson statistic of a contingency table. All-zero columns are dropped
/// before the degrees of freedom are counted.
pub fn pearson(table: &[Vec<usize>]) -> (f64, usize, Vec<usize>) {
    let cols = table.first().map_or(0, Vec::len);
    let kept: Vec<usize> = (0..cols).filter(|&c| table.iter().any(|row| row[c] > 0)).collect();
    let rows: Vec<Vec<f64>> = table
        .iter()
        .map(|row| kept.iter().map(|&c| row[c] as f64).collect())
        .filter(|row: &Vec<f64>| row.iter().sum::<f64>() > 0.0)
        .collect();
    let total: f64 = rows.iter().flatten().sum();
    if rows.len() < 2 || kept.len() < 2 {
        return (0.0, 0, kept);
    }
    let row_sums: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..kept.len()).map(|c| rows.iter().map(|r| r[c]).sum()).collect();
    let mut stat = 0.0;
    for (r, row) in rows.iter().enumerate() {
        for (c, &obs) in row.iter().enumerate() {
            let expected = row_sums[r] * col_sums[c] / total;
            stat += (obs - expected).powi(2) / expected;
        }
    }
    (stat, (rows.len() - 1) * (kept.len() - 1), kept)
}

/// Tests whether outcome regimes depend on the replicate seed.
pub fn chi2_seed_independence(ds: &Dataset) -> Result<ChiSquareResult> {
    let seeds = ds.seeds();
    if seeds.len() < 2 {
        return Err(Error::Precondition("seed independence needs at least two seeds".into()));
    }
    let mut table = vec![vec![0usize; 3]; seeds.len()];
    for r in &ds.records {
        let row = seeds.binary_search(&r.seed).expect("seed listed");
        table[row][r.outcome.label.index()] += 1;
    }
    let (chi2, df, kept) = pearson(&table);
    Ok(ChiSquareResult {
        chi2,
        df,
        p: chi2_sf(chi2, df as f64),
        seeds,
        labels: kept.iter().map(|&c| Regime::ALL[c]).collect(),
        table: table
            .iter()
            .map(|row| kept.iter().map(|&c| row[c]).collect())
            .collect(),
    })
}
