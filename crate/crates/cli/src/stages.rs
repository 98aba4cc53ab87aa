//! Stage bodies shared by the individual subcommands and the pipeline.

use std::fmt::Write as _;
use std::path::Path;

use ecozoom::analysis::{
    detect_tipping_points, fit_uncertainty, ice_instances, linspace, pdp_ice, sobol_indices, uncertainty_field,
    uncertainty_profile, CurveSet, PdpOptions, SobolIndices, SobolOptions, TippingPoint, UqOptions,
};
use ecozoom::cart::TreeNode;
use ecozoom::io::Provenance;
use ecozoom::runner::Dataset;
use ecozoom::screening::{
    anova_type2, bayes_limit, chi2_seed_independence, extract_thresholds, fit_tree, render_rules, required_replicates,
    suggest_clips, AleatoricReport, AnovaResult, ChiSquareResult, ClipSuggestion, ReplicationReport, Rule,
};
use ecozoom::surrogate::SurrogateModel;
use ecozoom::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::artifacts::{write_artifact, write_curves, write_field, write_profile, write_sobol_csv, write_sobol_pairs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenOptions {
    pub z: f64,
    pub epsilon: f64,
    pub tree_depth: usize,
    pub tree_min_leaf: usize,
    /// Leaves with mean score at or below this value motivate clips.
    pub clip_cutoff: f64,
}

impl Default for ScreenOptions {
    fn default() -> Self {
        ScreenOptions {
            z: 1.96,
            epsilon: 0.1,
            tree_depth: 3,
            tree_min_leaf: 20,
            clip_cutoff: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeReport {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub rules: Vec<Rule>,
    pub text: String,
    pub tree: TreeNode,
}

pub fn tree_report(ds: &Dataset, depth: usize, min_leaf: usize) -> TreeReport {
    let tree = fit_tree(ds, depth, min_leaf);
    let names = ds.space.names();
    TreeReport {
        max_depth: depth,
        min_leaf,
        rules: extract_thresholds(&tree, &names),
        text: render_rules(&tree, &names),
        tree,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementReport {
    pub cutoff: f64,
    pub suggestions: Vec<ClipSuggestion>,
}

pub fn describe_aleatoric(r: &AleatoricReport) -> String {
    let mut s = format!("Acc_max = {:.4} over {} configs x {} replicates", r.acc_max, r.config_ids.len(), r.replicates);
    if r.degenerate {
        s.push_str(" (single replicate: ceiling is trivially 1)");
    }
    s
}

pub fn describe_anova(a: &AnovaResult, top: usize) -> String {
    let mut s = format!("Type II ANOVA on {} runs, R^2 = {:.4}\n", a.n, a.r_squared);
    for row in a.ranked().iter().take(top) {
        let _ = writeln!(s, "  {:<6} share {:>7.4}  F {:>9.3}  p {:.3e}", row.name, row.variance_share, row.f, row.p);
    }
    let _ = write!(s, "  residual share {:.4}", a.residual_share);
    s
}

pub fn describe_chi2(c: &ChiSquareResult) -> String {
    format!("seed independence: chi2 = {:.4}, df = {}, p = {:.4}", c.chi2, c.df, c.p)
}

pub fn describe_nstar(r: &ReplicationReport) -> String {
    let mut s = format!(
        "n* = {:.2} (z = {}, eps = {}), recommended replicates {}",
        r.mean_nstar, r.z, r.epsilon, r.recommended_n
    );
    if r.degenerate {
        s.push_str(" (degenerate: no replicate spread)");
    }
    s
}

pub fn describe_clips(r: &RefinementReport) -> String {
    if r.suggestions.is_empty() {
        return format!("no clips suggested (no leaf mean <= {})", r.cutoff);
    }
    let mut s = String::new();
    for c in &r.suggestions {
        let _ = writeln!(
            s,
            "  {} -> [{}, {}]  from leaf {} (mean {:.3}, n {})",
            c.clip.dim, c.clip.lower, c.clip.upper, c.because, c.leaf_mean, c.leaf_count
        );
    }
    s.trim_end().to_string()
}

pub struct ScreeningResults {
    pub aleatoric: AleatoricReport,
    pub anova: AnovaResult,
    pub chi2: Option<ChiSquareResult>,
    pub tree: TreeReport,
    pub nstar: Option<ReplicationReport>,
    pub refinement: RefinementReport,
}

/// Runs every screening analysis and writes one JSON per analysis into `dir`.
pub fn screen_all(ds: &Dataset, opts: &ScreenOptions, dir: &Path, prov: &Provenance) -> Result<ScreeningResults> {
    let aleatoric = bayes_limit(ds);
    write_artifact(&dir.join("aleatoric.json"), prov, &aleatoric)?;
    let anova = anova_type2(ds)?;
    write_artifact(&dir.join("anova.json"), prov, &anova)?;
    let chi2 = match chi2_seed_independence(ds) {
        Ok(c) => Some(c),
        Err(Error::Precondition(_)) => None,
        Err(e) => return Err(e),
    };
    if let Some(c) = &chi2 {
        write_artifact(&dir.join("chi2.json"), prov, c)?;
    }
    let tree = tree_report(ds, opts.tree_depth, opts.tree_min_leaf);
    write_artifact(&dir.join("tree.json"), prov, &tree)?;
    let nstar = match required_replicates(ds, opts.z, opts.epsilon) {
        Ok(r) => Some(r),
        Err(Error::Precondition(_)) => None,
        Err(e) => return Err(e),
    };
    if let Some(r) = &nstar {
        write_artifact(&dir.join("nstar.json"), prov, r)?;
    }
    let refinement = RefinementReport {
        cutoff: opts.clip_cutoff,
        suggestions: suggest_clips(&tree.rules, &ds.space, opts.clip_cutoff),
    };
    write_artifact(&dir.join("refinement.json"), prov, &refinement)?;
    Ok(ScreeningResults {
        aleatoric,
        anova,
        chi2,
        tree,
        nstar,
        refinement,
    })
}

pub fn gsa(model: &SurrogateModel, opts: &SobolOptions, dir: &Path, prov: &Provenance) -> Result<SobolIndices> {
    let s = sobol_indices(|x| model.coexistence(x), &model.space, opts)?;
    write_artifact(&dir.join("sobol.json"), prov, &s)?;
    write_sobol_csv(&dir.join("sobol_indices.csv"), prov, &s)?;
    write_sobol_pairs(&dir.join("sobol_pairs.csv"), prov, &s)?;
    Ok(s)
}

pub fn explain(model: &SurrogateModel, ds: &Dataset, dim: &str, opts: &PdpOptions, path: &Path, prov: &Provenance) -> Result<CurveSet> {
    let curves = pdp_ice(|x| model.coexistence(x), ds, dim, opts)?;
    write_curves(path, prov, &curves)?;
    Ok(curves)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UqSummary {
    pub alpha: f64,
    pub conformal_quantile: f64,
    pub locally_weighted: bool,
    pub n_train: usize,
    pub n_calibration: usize,
    pub mean_sigma_aleatoric: f64,
    pub mean_sigma_epistemic: f64,
    pub mean_sigma_total: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TippingReport {
    pub points: Vec<TippingPoint>,
}

/// Dual-forest decomposition at the dataset's configurations, plus a
/// profile and tipping points along each requested dimension.
pub fn uq(
    model: &SurrogateModel,
    ds: &Dataset,
    opts: &UqOptions,
    dims: &[String],
    pdp: &PdpOptions,
    dir: &Path,
    prov: &Provenance,
) -> Result<(UqSummary, Vec<TippingPoint>)> {
    let est = fit_uncertainty(ds, opts)?;
    let groups = ds.groups();
    let ids: Vec<usize> = groups.iter().map(|g| g.config_id).collect();
    let points: Vec<Vec<f64>> = groups.iter().map(|g| g.params.0.clone()).collect();
    let oracle = |x: &[f64]| model.coexistence(x);
    let field = uncertainty_field(&est, &points, Some(&oracle));
    write_field(&dir.join("uq_field.csv"), prov, &ds.space, &ids, &field)?;
    let n = field.sigma_total.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let summary = UqSummary {
        alpha: opts.alpha,
        conformal_quantile: est.quantile,
        locally_weighted: est.locally_weighted,
        n_train: est.n_train,
        n_calibration: est.n_calibration,
        mean_sigma_aleatoric: mean(&field.sigma_aleatoric),
        mean_sigma_epistemic: mean(&field.sigma_epistemic),
        mean_sigma_total: mean(&field.sigma_total),
    };
    write_artifact(&dir.join("uq_summary.json"), prov, &summary)?;

    let instances: Vec<Vec<f64>> = ice_instances(ds, pdp.ice_subsample.max(1), pdp.seed).into_iter().map(|(_, x)| x).collect();
    let mut tipping = Vec::new();
    for dim in dims {
        let index = ds
            .space
            .index_of(dim)
            .ok_or_else(|| Error::Precondition(format!("unknown dimension {dim}")))?;
        let d = &ds.space.dims[index];
        let grid = linspace(d.lower, d.upper, pdp.grid_size);
        let profile = uncertainty_profile(&est, dim, index, &grid, &instances);
        let curves = pdp_ice(oracle, ds, dim, &PdpOptions { color_dim: None, ..pdp.clone() })?;
        write_profile(&dir.join(format!("uq_profile_{dim}.csv")), prov, &profile, Some(&curves.pdp))?;
        tipping.extend(detect_tipping_points(&curves, &profile)?);
    }
    tipping.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
    write_artifact(&dir.join("tipping_points.json"), prov, &TippingReport { points: tipping.clone() })?;
    Ok((summary, tipping))
}
