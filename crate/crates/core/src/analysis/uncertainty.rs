use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{ForestParams, RandomForest};
use crate::runner::Dataset;
use crate::sim::Regime;
use crate::space::ParamVector;
use crate::stats::{conformal_quantile, sample_std};

pub const MIN_CALIBRATION: usize = 10;

/// Combined standard deviation of two independent sources.
pub fn total_sigma(aleatoric: f64, epistemic: f64) -> f64 {
    (aleatoric * aleatoric + epistemic * epistemic).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UqOptions {
    pub alpha: f64,
    /// Fraction of configurations held out for calibration.
    pub calibration_fraction: f64,
    pub forest: ForestParams,
    /// Scale conformal scores by the aleatoric forest, giving x-varying bands.
    pub locally_weighted: bool,
    pub seed: u64,
}

impl Default for UqOptions {
    fn default() -> Self {
        UqOptions {
            alpha: 0.1,
            calibration_fraction: 0.25,
            forest: ForestParams::default(),
            locally_weighted: false,
            seed: 0,
        }
    }
}

/// Offset added to the aleatoric scale in locally weighted mode.
const LOCAL_FLOOR: f64 = 0.05;

/// Dual-forest estimator: forest A predicts the coexistence rate, forest B
/// the replicate spread. A split-conformal quantile of forest A's held-out
/// residuals supplies the epistemic half-width.
#[derive(Debug, Clone)]
pub struct UncertaintyModel {
    pub rate: RandomForest,
    pub spread: RandomForest,
    pub quantile: f64,
    pub alpha: f64,
    pub locally_weighted: bool,
    pub n_train: usize,
    pub n_calibration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigmas {
    pub p_hat: f64,
    pub aleatoric: f64,
    pub epistemic: f64,
    pub total: f64,
}

impl UncertaintyModel {
    pub fn fit_xy(x: &[Vec<f64>], p_hat: &[f64], spread: &[f64], opts: &UqOptions) -> Result<Self> {
        let n = x.len();
        if !(0.0..1.0).contains(&opts.alpha) || opts.alpha == 0.0 {
            return Err(Error::Precondition(format!("alpha must lie in (0, 1), got {}", opts.alpha)));
        }
        let n_cal = (n as f64 * opts.calibration_fraction).round() as usize;
        if n_cal < MIN_CALIBRATION {
            return Err(Error::Precondition(format!(
                "calibration split has {n_cal} configurations; at least {MIN_CALIBRATION} are needed"
            )));
        }
        if n - n_cal < 2 {
            return Err(Error::Precondition("too few configurations left for training".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.seed));
        let (cal, train) = order.split_at(n_cal);
        let pick = |rows: &[usize], v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let train_x: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let rate = RandomForest::fit(&train_x, &pick(train, p_hat), &opts.forest)?;
        let spread_forest = RandomForest::fit(
            x,
            spread,
            &ForestParams {
                seed: opts.forest.seed.wrapping_add(1),
                ..opts.forest
            },
        )?;
        let scores: Vec<f64> = cal
            .iter()
            .map(|&i| {
                let r = (p_hat[i] - rate.predict(&x[i])).abs();
                if opts.locally_weighted {
                    r / (spread_forest.predict(&x[i]) + LOCAL_FLOOR)
                } else {
                    r
                }
            })
            .collect();
        Ok(UncertaintyModel {
            rate,
            spread: spread_forest,
            quantile: conformal_quantile(&scores, opts.alpha),
            alpha: opts.alpha,
            locally_weighted: opts.locally_weighted,
            n_train: train.len(),
            n_calibration: n_cal,
        })
    }

    pub fn at(&self, x: &[f64]) -> Sigmas {
        let aleatoric = self.spread.predict(x).max(0.0);
        let epistemic = if self.locally_weighted {
            self.quantile * (aleatoric + LOCAL_FLOOR)
        } else {
            self.quantile
        };
        Sigmas {
            p_hat: self.rate.predict(x),
            aleatoric,
            epistemic,
            total: total_sigma(aleatoric, epistemic),
        }
    }
}

/// Per-configuration coexistence rate and its replicate standard deviation.
pub fn config_targets(ds: &Dataset) -> (Vec<usize>, Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let groups = ds.groups();
    let mut ids = Vec::with_capacity(groups.len());
    let mut x = Vec::with_capacity(groups.len());
    let mut p = Vec::with_capacity(groups.len());
    let mut s = Vec::with_capacity(groups.len());
    for g in &groups {
        let ind: Vec<f64> = g.labels().iter().map(|&l| f64::from(u8::from(l == Regime::Coexistence))).collect();
        ids.push(g.config_id);
        x.push(g.params.0.clone());
        p.push(ind.iter().sum::<f64>() / ind.len() as f64);
        s.push(sample_std(&ind));
    }
    (ids, x, p, s)
}

pub fn fit_uncertainty(ds: &Dataset, opts: &UqOptions) -> Result<UncertaintyModel> {
    if ds.replicates() < 2 {
        return Err(Error::Precondition("uncertainty decomposition needs at least two replicates per config".into()));
    }
    let (_, x, p, s) = config_targets(ds);
    UncertaintyModel::fit_xy(&x, &p, &s, opts)
}

/// Sigmas at explicit points, with an optional surrogate probability column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyField {
    pub alpha: f64,
    pub points: Vec<ParamVector>,
    pub p_hat: Vec<f64>,
    pub p_surrogate: Option<Vec<f64>>,
    pub sigma_aleatoric: Vec<f64>,
    pub sigma_epistemic: Vec<f64>,
    pub sigma_total: Vec<f64>,
}

pub fn uncertainty_field(model: &UncertaintyModel, points: &[Vec<f64>], surrogate: Option<&(dyn Fn(&[f64]) -> f64 + Sync)>) -> UncertaintyField {
    let sig: Vec<Sigmas> = points.iter().map(|x| model.at(x)).collect();
    UncertaintyField {
        alpha: model.alpha,
        points: points.iter().map(|x| ParamVector(x.clone())).collect(),
        p_hat: sig.iter().map(|s| s.p_hat).collect(),
        p_surrogate: surrogate.map(|f| points.iter().map(|x| f(x)).collect()),
        sigma_aleatoric: sig.iter().map(|s| s.aleatoric).collect(),
        sigma_epistemic: sig.iter().map(|s| s.epistemic).collect(),
        sigma_total: sig.iter().map(|s| s.total).collect(),
    }
}

/// Sigmas along one dimension, averaged over a set of instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyProfile {
    pub dim: String,
    pub alpha: f64,
    pub grid: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub sigma_aleatoric: Vec<f64>,
    pub sigma_epistemic: Vec<f64>,
    pub sigma_total: Vec<f64>,
}

/// Marginal-mean slice: each grid value replaces `dim` in every instance,
/// the component sigmas are averaged, and the total is combined afterwards.
pub fn uncertainty_profile(model: &UncertaintyModel, name: &str, dim: usize, grid: &[f64], instances: &[Vec<f64>]) -> UncertaintyProfile {
    let n = instances.len() as f64;
    let mut p_hat = Vec::with_capacity(grid.len());
    let mut sa = Vec::with_capacity(grid.len());
    let mut se = Vec::with_capacity(grid.len());
    for &v in grid {
        let (mut p, mut a, mut e) = (0.0, 0.0, 0.0);
        for x in instances {
            let mut point = x.clone();
            point[dim] = v;
            let s = model.at(&point);
            p += s.p_hat;
            a += s.aleatoric;
            e += s.epistemic;
        }
        p_hat.push(p / n);
        sa.push(a / n);
        se.push(e / n);
    }
    let total = sa.iter().zip(&se).map(|(&a, &e)| total_sigma(a, e)).collect();
    UncertaintyProfile {
        dim: name.to_string(),
        alpha: model.alpha,
        grid: grid.to_vec(),
        p_hat,
        sigma_aleatoric: sa,
        sigma_epistemic: se,
        sigma_total: total,
    }
}

/// Config ids held out for calibration under the given options.
pub fn calibration_ids(ids: &[usize], opts: &UqOptions) -> HashSet<usize> {
    let n_cal = (ids.len() as f64 * opts.calibration_fraction).round() as usize;
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.seed));
    order[..n_cal.min(ids.len())].iter().map(|&i| ids[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn three_four_five() {
        assert_eq!(total_sigma(0.3, 0.4), 0.5);
    }

    proptest! {
        #[test]
        fn combination_is_symmetric_and_dominates(a in 0.0f64..10.0, e in 0.0f64..10.0) {
            prop_assert_eq!(total_sigma(a, e), total_sigma(e, a));
            prop_assert!(total_sigma(a, e) >= a.max(e));
        }
    }

    fn small_opts() -> UqOptions {
        UqOptions {
            forest: ForestParams {
                n_trees: 30,
                ..ForestParams::default()
            },
            ..UqOptions::default()
        }
    }

    #[test]
    fn zero_spread_gives_zero_aleatoric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<Vec<f64>> = (0..80).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let p: Vec<f64> = x.iter().map(|r| f64::from(u8::from(r[0] > 0.5))).collect();
        let m = UncertaintyModel::fit_xy(&x, &p, &vec![0.0; 80], &small_opts()).unwrap();
        for probe in [[0.1, 0.1], [0.9, 0.2], [0.5, 0.5]] {
            let s = m.at(&probe);
            assert!(s.aleatoric <= 0.02);
            assert_eq!(s.total, total_sigma(s.aleatoric, s.epistemic));
        }
    }

    #[test]
    fn small_calibration_split_is_rejected() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let y = vec![0.5; 30];
        let err = UncertaintyModel::fit_xy(&x, &y, &y, &small_opts()).unwrap_err();
        assert!(matches!(err, Error::Precondition(ref m) if m.contains("calibration")));
    }

    #[test]
    fn locally_weighted_bands_vary() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen()]).collect();
        let s: Vec<f64> = x.iter().map(|r| 0.4 * r[0]).collect();
        let p: Vec<f64> = x.iter().zip(&s).map(|(r, s)| r[0] + s * (rng.gen::<f64>() - 0.5)).collect();
        let opts = UqOptions {
            locally_weighted: true,
            ..small_opts()
        };
        let m = UncertaintyModel::fit_xy(&x, &p, &s, &opts).unwrap();
        assert!(m.at(&[0.95]).epistemic > m.at(&[0.05]).epistemic);
    }
}
