use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runner::Dataset;
use crate::stats::f_sf;

/// A model term: one column for a continuous lever, several dummies for a
/// categorical factor.
#[derive(Debug, Clone)]
pub struct Factor {
    pub name: String,
    pub columns: Vec<Vec<f64>>,
}

impl Factor {
    pub fn continuous(name: &str, values: Vec<f64>) -> Self {
        Factor {
            name: name.to_string(),
            columns: vec![values],
        }
    }

    /// Treatment coding against the first level.
    pub fn categorical<T: PartialEq + Clone>(name: &str, values: &[T]) -> Self {
        let mut levels: Vec<T> = Vec::new();
        for v in values {
            if !levels.contains(v) {
                levels.push(v.clone());
            }
        }
        let columns = levels[1..]
            .iter()
            .map(|lvl| values.iter().map(|v| if v == lvl { 1.0 } else { 0.0 }).collect())
            .collect();
        Factor {
            name: name.to_string(),
            columns,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRow {
    pub name: String,
    pub sum_of_squares: f64,
    pub df: usize,
    /// Fraction of the ANOVA table's total sum of squares.
    pub variance_share: f64,
    pub f: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub per_factor: Vec<FactorRow>,
    pub residual_ss: f64,
    pub residual_df: usize,
    pub residual_share: f64,
    pub r_squared: f64,
    pub n: usize,
}

impl AnovaResult {
    /// Factors sorted by decreasing variance share.
    pub fn ranked(&self) -> Vec<&FactorRow> {
        let mut rows: Vec<&FactorRow> = self.per_factor.iter().collect();
        rows.sort_by(|a, b| b.variance_share.total_cmp(&a.variance_share));
        rows
    }
}

/// Centered, unit-scaled regressors and their cross products.
struct Normal {
    gram: Vec<Vec<f64>>,
    xty: Vec<f64>,
    yty: f64,
}

fn normal_equations(columns: &[&Vec<f64>], y: &[f64]) -> Normal {
    let n = y.len() as f64;
    let scaled: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / n;
            let centered: Vec<f64> = c.iter().map(|v| v - m).collect();
            let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
            let s = if norm > 0.0 { 1.0 / norm } else { 0.0 };
            centered.into_iter().map(|v| v * s).collect()
        })
        .collect();
    let ym = y.iter().sum::<f64>() / n;
    let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let p = scaled.len();
    let mut gram = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let g: f64 = scaled[i].iter().zip(&scaled[j]).map(|(a, b)| a * b).sum();
            gram[i][j] = g;
            gram[j][i] = g;
        }
    }
    let xty = scaled.iter().map(|c| c.iter().zip(&yc).map(|(a, b)| a * b).sum()).collect();
    let yty = yc.iter().map(|v| v * v).sum();
    Normal { gram, xty, yty }
}

/// Residual sum of squares of the least-squares fit on the column subset.
fn rss_subset(eq: &Normal, subset: &[usize]) -> Result<f64> {
    let p = subset.len();
    if p == 0 {
        return Ok(eq.yty);
    }
    // Cholesky of the sub-Gram matrix; columns are unit-norm, so a tiny
    // pivot means near-collinearity.
    let mut l = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = eq.gram[subset[i]][subset[j]];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 1e-10 {
                    return Err(Error::DegenerateDesign(format!(
                        "column {} is collinear with the others",
                        subset[i]
                    )));
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let b: Vec<f64> = subset.iter().map(|&c| eq.xty[c]).collect();
    let mut z = vec![0.0; p];
    for i in 0..p {
        let s: f64 = (0..i).map(|k| l[i][k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i][i];
    }
    // RSS = y'y - b' G^-1 b = y'y - |z|^2
    let explained: f64 = z.iter().map(|v| v * v).sum();
    Ok((eq.yty - explained).max(0.0))
}

/// Type II sums of squares for a main-effects linear model with intercept.
pub fn anova_type2_factors(factors: &[Factor], y: &[f64]) -> Result<AnovaResult> {
    let n = y.len();
    for f in factors {
        if f.columns.is_empty() {
            return Err(Error::Precondition(format!("factor {} has a single level", f.name)));
        }
        for c in &f.columns {
            if c.len() != n {
                return Err(Error::Precondition(format!("factor {} has the wrong length", f.name)));
            }
            let first = c[0];
            if c.iter().all(|&v| v == first) {
                return Err(Error::Precondition(format!("factor {} needs two distinct values", f.name)));
            }
        }
    }
    let columns: Vec<&Vec<f64>> = factors.iter().flat_map(|f| f.columns.iter()).collect();
    let p = columns.len();
    if n <= p + 1 {
        return Err(Error::DegenerateDesign(format!("{n} observations for {p} regressors")));
    }
    let eq = normal_equations(&columns, y);
    let all: Vec<usize> = (0..p).collect();
    let rss_full = rss_subset(&eq, &all)?;
    let residual_df = n - p - 1;

    let mut spans = Vec::with_capacity(factors.len());
    let mut start = 0;
    for f in factors {
        spans.push(start..start + f.columns.len());
        start += f.columns.len();
    }
    let mut ss = Vec::with_capacity(factors.len());
    for span in &spans {
        let reduced: Vec<usize> = all.iter().copied().filter(|c| !span.contains(c)).collect();
        ss.push((rss_subset(&eq, &reduced)? - rss_full).max(0.0));
    }
    let table_total: f64 = ss.iter().sum::<f64>() + rss_full;
    let share = |v: f64| if table_total > 0.0 { v / table_total } else { 0.0 };
    let mse = rss_full / residual_df as f64;
    let per_factor = factors
        .iter()
        .zip(&spans)
        .zip(&ss)
        .map(|((f, span), &s)| {
            let df = span.len();
            let f_stat = if mse > 0.0 { (s / df as f64) / mse } else if s > 0.0 { f64::INFINITY } else { 0.0 };
            FactorRow {
                name: f.name.clone(),
                sum_of_squares: s,
                df,
                variance_share: share(s),
                f: f_stat,
                p: f_sf(f_stat, df as f64, residual_df as f64),
            }
        })
        .collect();
    Ok(AnovaResult {
        per_factor,
        residual_ss: rss_full,
        residual_df,
        residual_share: if table_total > 0.0 { rss_full / table_total } else { 1.0 },
        r_squared: if eq.yty > 0.0 { 1.0 - rss_full / eq.yty } else { 0.0 },
        n,
    })
}

/// Scores regressed on every lever plus the replicate seed as a categorical factor.
pub fn anova_type2(ds: &Dataset) -> Result<AnovaResult> {
    let mut factors: Vec<Factor> = ds
        .space
        .dims
        .iter()
        .enumerate()
        .map(|(d, dim)| Factor::continuous(&dim.name, ds.records.iter().map(|r| r.params.0[d]).collect()))
        .collect();
    let seeds: Vec<u64> = ds.records.iter().map(|r| r.seed).collect();
    let seed_factor = Factor::categorical("seed", &seeds);
    if !seed_factor.columns.is_empty() {
        factors.push(seed_factor);
    }
    let y: Vec<f64> = ds.records.iter().map(|r| r.outcome.score()).collect();
    anova_type2_factors(&factors, &y)
}
