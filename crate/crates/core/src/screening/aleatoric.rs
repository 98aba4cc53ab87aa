use serde::{Deserialize, Serialize};

use crate::runner::Dataset;
use crate::stats::lower_median;

/// Accuracy ceiling of a predictor that always answers a configuration's
/// median replicate outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AleatoricReport {
    pub acc_max: f64,
    pub config_ids: Vec<usize>,
    pub per_config_agreement: Vec<f64>,
    pub group_medians: Vec<f64>,
    pub replicates: usize,
    /// Set when each configuration has a single run and the ceiling is trivially 1.
    pub degenerate: bool,
}

/// Median-agreement ceiling over replicate groups of ordinal scores.
///
/// `groups` holds the scores of each configuration's replicates.
pub fn acc_max_from_groups(groups: &[Vec<f64>]) -> (f64, Vec<f64>, Vec<f64>) {
    let mut hits = 0usize;
    let mut total = 0usize;
    let mut agreement = Vec::with_capacity(groups.len());
    let mut medians = Vec::with_capacity(groups.len());
    for scores in groups {
        let median = lower_median(scores);
        let agree = scores.iter().filter(|&&s| s == median).count();
        hits += agree;
        total += scores.len();
        agreement.push(agree as f64 / scores.len() as f64);
        medians.push(median);
    }
    (hits as f64 / total as f64, agreement, medians)
}

pub fn bayes_limit(ds: &Dataset) -> AleatoricReport {
    let groups = ds.groups();
    let scores: Vec<Vec<f64>> = groups.iter().map(|g| g.scores()).collect();
    let (acc_max, per_config_agreement, group_medians) = acc_max_from_groups(&scores);
    let replicates = ds.replicates();
    AleatoricReport {
        acc_max,
        config_ids: groups.iter().map(|g| g.config_id).collect(),
        per_config_agreement,
        group_medians,
        replicates,
        degenerate: replicates < 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unanimous_groups_reach_one() {
        let groups = vec![vec![1.0; 5], vec![0.0; 5], vec![0.5; 5]];
        assert_eq!(acc_max_from_groups(&groups).0, 1.0);
    }

    #[test]
    fn hand_enumerated_group() {
        let (acc, agree, med) = acc_max_from_groups(&[vec![1.0, 1.0, 1.0, 0.5, 0.0]]);
        assert_eq!(med, vec![1.0]);
        assert_eq!(agree, vec![0.6]);
        assert_eq!(acc, 0.6);
    }

    #[test]
    fn even_groups_use_lower_center() {
        // sorted {0, 0.5, 1, 1}: lower center 0.5, one agreeing run
        let (acc, _, med) = acc_max_from_groups(&[vec![1.0, 0.0, 1.0, 0.5]]);
        assert_eq!(med, vec![0.5]);
        assert_eq!(acc, 0.25);
    }
}
