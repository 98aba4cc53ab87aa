use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train_xy, TrainHyper, N_CLASSES};
use crate::error::{Error, Result};
use crate::runner::Dataset;
use crate::sim::Regime;
use crate::stats::lower_median;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Rows are true classes, columns predicted classes.
    pub confusion: [[usize; N_CLASSES]; N_CLASSES],
    /// `None` for classes absent from every test fold.
    pub per_class_recall: [Option<f64>; N_CLASSES],
    pub majority_share: f64,
}

/// Assigns each group to one of `k` folds, stratified on `strata`.
///
/// Groups of each stratum are shuffled and dealt round-robin, continuing
/// from where the previous stratum stopped so fold sizes stay level.
pub fn group_folds(strata: &[usize], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; strata.len()];
    let mut next = 0;
    let n_strata = strata.iter().max().map_or(0, |m| m + 1);
    for s in 0..n_strata {
        let mut members: Vec<usize> = (0..strata.len()).filter(|&i| strata[i] == s).collect();
        members.shuffle(&mut rng);
        for i in members {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

/// Stratified group k-fold cross-validation; replicates of one
/// configuration never straddle train and test.
pub fn cross_validate(ds: &Dataset, k: usize, cv_seed: u64, hyper: &TrainHyper) -> Result<CvReport> {
    let groups = ds.groups();
    if k < 2 {
        return Err(Error::Precondition("cross-validation needs k >= 2".into()));
    }
    if groups.len() < k {
        return Err(Error::Precondition(format!(
            "cross-validation needs at least {k} configurations, found {}",
            groups.len()
        )));
    }
    let strata: Vec<usize> = groups
        .iter()
        .map(|g| Regime::from_score(lower_median(&g.scores())).expect("scores on grid").index())
        .collect();
    let folds = group_folds(&strata, k, cv_seed);

    let results = (0..k)
        .into_par_iter()
        .map(|f| {
            let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for (g, &fold) in groups.iter().zip(&folds) {
                for r in &g.runs {
                    let (xs, ys) = if fold == f { (&mut vx, &mut vy) } else { (&mut tx, &mut ty) };
                    xs.push(r.params.0.clone());
                    ys.push(r.outcome.label.index());
                }
            }
            let model = train_xy(&ds.space, &tx, &ty, hyper)?;
            let mut confusion = [[0usize; N_CLASSES]; N_CLASSES];
            for (x, &y) in vx.iter().zip(&vy) {
                confusion[y][model.predict_class(x)] += 1;
            }
            Ok(confusion)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut confusion = [[0usize; N_CLASSES]; N_CLASSES];
    let mut fold_accuracies = Vec::with_capacity(k);
    for c in &results {
        let total: usize = c.iter().flatten().sum();
        let hit: usize = (0..N_CLASSES).map(|i| c[i][i]).sum();
        fold_accuracies.push(hit as f64 / total as f64);
        for i in 0..N_CLASSES {
            for j in 0..N_CLASSES {
                confusion[i][j] += c[i][j];
            }
        }
    }
    let per_class_recall = std::array::from_fn(|i| {
        let row: usize = confusion[i].iter().sum();
        (row > 0).then(|| confusion[i][i] as f64 / row as f64)
    });
    let shares = ds.class_shares();
    Ok(CvReport {
        k,
        mean_accuracy: fold_accuracies.iter().sum::<f64>() / k as f64,
        fold_accuracies,
        confusion,
        per_class_recall,
        majority_share: shares.iter().copied().fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn folds_are_stratified_within_one(strata in prop::collection::vec(0usize..3, 10..200), k in 2usize..11, seed in any::<u64>()) {
            let folds = group_folds(&strata, k, seed);
            prop_assert!(folds.iter().all(|&f| f < k));
            for s in 0..3 {
                let total = strata.iter().filter(|&&v| v == s).count() as f64;
                let ideal = total / k as f64;
                for f in 0..k {
                    let n = strata.iter().zip(&folds).filter(|(&v, &g)| v == s && g == f).count() as f64;
                    prop_assert!((n - ideal).abs() <= 1.0);
                }
            }
        }
    }
}
