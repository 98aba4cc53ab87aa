//! Model-based screening of a replicated dataset: the aleatoric accuracy
//! ceiling, linear variance decomposition, seed independence, threshold
//! rules and replication sizing.

mod aleatoric;
mod anova;
mod chi2;
mod nstar;
mod tree;

pub use aleatoric::{acc_max_from_groups, bayes_limit, AleatoricReport};
pub use anova::{anova_type2, anova_type2_factors, AnovaResult, Factor, FactorRow};
pub use chi2::{chi2_seed_independence, pearson, ChiSquareResult};
pub use nstar::{nstar, replication_from_sigmas, required_replicates, ReplicationReport};
pub use tree::{extract_thresholds, fit_tree, render_rules, suggest_clips, ClipSuggestion, Condition, Rule, Side};
