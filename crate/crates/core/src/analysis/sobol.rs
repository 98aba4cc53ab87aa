use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::ParameterSpace;

/// Which pairs get second-order indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecondOrder {
    Off,
    /// Pairs among the `k` dims with the largest total index.
    TopTotal(usize),
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolOptions {
    pub n_base: usize,
    pub second_order: SecondOrder,
    /// Bootstrap resamples for percentile intervals on S1 and ST.
    pub bootstrap: Option<usize>,
    pub seed: u64,
}

impl Default for SobolOptions {
    fn default() -> Self {
        SobolOptions {
            n_base: 16384,
            second_order: SecondOrder::TopTotal(6),
            bootstrap: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairIndex {
    pub a: String,
    pub b: String,
    pub s2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub level: f64,
    pub s1: Vec<Interval>,
    pub st: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolIndices {
    pub names: Vec<String>,
    pub s1: Vec<f64>,
    pub st: Vec<f64>,
    pub s2: Vec<PairIndex>,
    pub n_base: usize,
    pub evaluations: usize,
    pub variance: f64,
    pub bootstrap_ci: Option<BootstrapCi>,
}

impl SobolIndices {
    /// Dimension indices ordered by decreasing total index.
    pub fn ranked_by_total(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.names.len()).collect();
        idx.sort_by(|&a, &b| self.st[b].total_cmp(&self.st[a]));
        idx
    }

    pub fn sum_s1(&self) -> f64 {
        self.s1.iter().sum()
    }
}

/// Sobol indices of `f` under the uniform prior of the space.
pub fn sobol_indices<F>(f: F, space: &ParameterSpace, opts: &SobolOptions) -> Result<SobolIndices>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let names: Vec<String> = space.names().iter().map(|s| s.to_string()).collect();
    sobol_on_box(f, &names, &space.bounds(), opts)
}

fn evaluate<F>(f: &F, points: Vec<Vec<f64>>) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let values: Vec<f64> = points.par_iter().map(|p| f(p)).collect();
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "oracle returned {} at {:?}",
            values[bad], points[bad]
        )));
    }
    Ok(values)
}

/// Jansen first-order and total estimators on rows `rows` of the blocks.
fn first_and_total(fa: &[f64], fb: &[f64], fab: &[Vec<f64>], rows: &[usize]) -> (Vec<f64>, Vec<f64>, f64) {
    let n = rows.len() as f64;
    let all = rows.iter().flat_map(|&r| [fa[r], fb[r]]);
    let mean = all.clone().sum::<f64>() / (2.0 * n);
    let var = all.map(|v| (v - mean).powi(2)).sum::<f64>() / (2.0 * n);
    let mut s1 = Vec::with_capacity(fab.len());
    let mut st = Vec::with_capacity(fab.len());
    for col in fab {
        let d_b: f64 = rows.iter().map(|&r| (fb[r] - col[r]).powi(2)).sum::<f64>() / n;
        let d_a: f64 = rows.iter().map(|&r| (fa[r] - col[r]).powi(2)).sum::<f64>() / n;
        if var > 0.0 {
            s1.push(1.0 - d_b / (2.0 * var));
            st.push(d_a / (2.0 * var));
        } else {
            s1.push(0.0);
            st.push(0.0);
        }
    }
    (s1, st, var)
}

/// Sobol indices on an axis-aligned box with named dimensions.
///
/// Uses the Saltelli design: base matrices A and B, hybrids A_B^(i) with
/// column i from B, and for second order B_A^(i) with column i from A.
pub fn sobol_on_box<F>(f: F, names: &[String], bounds: &[(f64, f64)], opts: &SobolOptions) -> Result<SobolIndices>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let m = opts.n_base;
    let d = bounds.len();
    if m < 128 {
        return Err(Error::Precondition(format!("Sobol analysis needs at least 128 base samples, got {m}")));
    }
    if d == 0 || names.len() != d {
        return Err(Error::Precondition("Sobol analysis needs named, non-empty bounds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut draw = || -> Vec<Vec<f64>> {
        (0..m)
            .map(|_| bounds.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.gen::<f64>()).collect())
            .collect()
    };
    let a = draw();
    let b = draw();
    let hybrid = |base: &[Vec<f64>], donor: &[Vec<f64>], i: usize| -> Vec<Vec<f64>> {
        base.iter()
            .zip(donor)
            .map(|(row, don)| {
                let mut r = row.clone();
                r[i] = don[i];
                r
            })
            .collect()
    };
    let fa = evaluate(&f, a.clone())?;
    let fb = evaluate(&f, b.clone())?;
    let mut fab = Vec::with_capacity(d);
    for i in 0..d {
        fab.push(evaluate(&f, hybrid(&a, &b, i))?);
    }
    let mut evaluations = m * (d + 2);
    let all_rows: Vec<usize> = (0..m).collect();
    let (s1, st, variance) = first_and_total(&fa, &fb, &fab, &all_rows);

    let mut s2 = Vec::new();
    let chosen: Vec<usize> = match opts.second_order {
        SecondOrder::Off => Vec::new(),
        SecondOrder::All => (0..d).collect(),
        SecondOrder::TopTotal(k) => {
            let mut idx: Vec<usize> = (0..d).collect();
            idx.sort_by(|&x, &y| st[y].total_cmp(&st[x]));
            idx.truncate(k.min(d));
            idx.sort_unstable();
            idx
        }
    };
    if chosen.len() >= 2 && variance > 0.0 {
        let mean = (fa.iter().sum::<f64>() + fb.iter().sum::<f64>()) / (2 * m) as f64;
        let mut fba = Vec::with_capacity(chosen.len());
        for &i in &chosen {
            fba.push(evaluate(&f, hybrid(&b, &a, i))?);
        }
        evaluations += m * chosen.len();
        let centered = |v: &[f64]| v.iter().map(|x| x - mean).collect::<Vec<_>>();
        let ca = centered(&fa);
        let cb = centered(&fb);
        for (p, &i) in chosen.iter().enumerate() {
            let cba = centered(&fba[p]);
            for &j in chosen.iter().filter(|&&j| j > i) {
                let cab = centered(&fab[j]);
                let vij = (0..m).map(|r| cba[r] * cab[r] - ca[r] * cb[r]).sum::<f64>() / m as f64;
                s2.push(PairIndex {
                    a: names[i].clone(),
                    b: names[j].clone(),
                    s2: vij / variance - s1[i] - s1[j],
                });
            }
        }
    }

    let bootstrap_ci = opts.bootstrap.filter(|&n| n > 0).map(|reps| {
        let intervals: Vec<(Vec<f64>, Vec<f64>)> = (0..reps)
            .into_par_iter()
            .map(|k| {
                let mut r = ChaCha8Rng::seed_from_u64(opts.seed);
                r.set_stream(k as u64 + 1);
                let rows: Vec<usize> = (0..m).map(|_| r.gen_range(0..m)).collect();
                let (s1, st, _) = first_and_total(&fa, &fb, &fab, &rows);
                (s1, st)
            })
            .collect();
        let pct = |values: &mut Vec<f64>| {
            values.sort_by(f64::total_cmp);
            let at = |q: f64| values[((q * (values.len() - 1) as f64).round()) as usize];
            Interval { lo: at(0.025), hi: at(0.975) }
        };
        BootstrapCi {
            level: 0.95,
            s1: (0..d).map(|i| pct(&mut intervals.iter().map(|x| x.0[i]).collect())).collect(),
            st: (0..d).map(|i| pct(&mut intervals.iter().map(|x| x.1[i]).collect())).collect(),
        }
    });

    Ok(SobolIndices {
        names: names.to_vec(),
        s1,
        st,
        s2,
        n_base: m,
        evaluations,
        variance,
        bootstrap_ci,
    })
}
