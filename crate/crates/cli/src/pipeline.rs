//! Config-driven two-phase run: design, simulate and screen; refine;
//! then design, simulate, surrogate, sensitivity, explanation and UQ.

use std::fs;
use std::path::{Path, PathBuf};

use ecozoom::analysis::{PdpOptions, SecondOrder, SobolOptions, UqOptions};
use ecozoom::forest::ForestParams;
use ecozoom::io::{load_dataset, read_json, save_dataset, save_design, sidecar_path, write_atomic, Provenance};
use ecozoom::runner::{run_batch, Dataset};
use ecozoom::sim::SimTemplate;
use ecozoom::space::{expand_replicates, lhs_sample, refine_space, Clip, ParameterSpace};
use ecozoom::surrogate::{cross_validate, save_model, train_mlp, TrainHyper};
use ecozoom::Error;
use serde::{Deserialize, Serialize};

use crate::artifacts::{digest, write_artifact, write_regimes};
use crate::report::{render_report, EXPECTED, REPORT_FILE};
use crate::stages::{self, describe_clips, RefinementReport, ScreenOptions};
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub configs: usize,
    pub seeds: Vec<u64>,
    pub design_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    /// Apply the suggested clips without a `--confirm-clips` flag.
    pub confirm: bool,
    /// Explicit clips; when present they replace the suggestions.
    pub clips: Option<Vec<Clip>>,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { confirm: false, clips: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    #[serde(flatten)]
    pub hyper: TrainHyper,
    pub cv_folds: usize,
    pub cv_seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            hyper: TrainHyper::default(),
            cv_folds: 10,
            cv_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GsaConfig {
    pub n_base: usize,
    /// 0 disables second order; `all_pairs` overrides it.
    pub top_pairs: usize,
    pub all_pairs: bool,
    pub bootstrap: Option<usize>,
    pub seed: u64,
}

impl Default for GsaConfig {
    fn default() -> Self {
        GsaConfig {
            n_base: 4096,
            top_pairs: 6,
            all_pairs: false,
            bootstrap: None,
            seed: 0,
        }
    }
}

impl GsaConfig {
    pub fn options(&self) -> SobolOptions {
        SobolOptions {
            n_base: self.n_base,
            second_order: if self.all_pairs {
                SecondOrder::All
            } else if self.top_pairs >= 2 {
                SecondOrder::TopTotal(self.top_pairs)
            } else {
                SecondOrder::Off
            },
            bootstrap: self.bootstrap,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub dims: Vec<String>,
    pub color_by: Option<String>,
    pub grid: usize,
    pub ice: usize,
    pub seed: u64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            dims: vec!["BG".into(), "PH".into()],
            color_by: Some("BG".into()),
            grid: 40,
            ice: 200,
            seed: 0,
        }
    }
}

impl ExplainConfig {
    pub fn pdp(&self) -> PdpOptions {
        PdpOptions {
            grid_size: self.grid,
            ice_subsample: self.ice,
            color_dim: self.color_by.clone(),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UqConfig {
    pub alpha: f64,
    pub calibration_fraction: f64,
    pub trees: usize,
    pub min_leaf: usize,
    pub locally_weighted: bool,
    pub seed: u64,
}

impl Default for UqConfig {
    fn default() -> Self {
        UqConfig {
            alpha: 0.1,
            calibration_fraction: 0.25,
            trees: 200,
            min_leaf: 5,
            locally_weighted: false,
            seed: 0,
        }
    }
}

impl UqConfig {
    pub fn options(&self) -> UqOptions {
        UqOptions {
            alpha: self.alpha,
            calibration_fraction: self.calibration_fraction,
            forest: ForestParams {
                n_trees: self.trees,
                min_leaf: self.min_leaf,
                seed: self.seed,
                ..ForestParams::default()
            },
            locally_weighted: self.locally_weighted,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub output_dir: PathBuf,
    /// JSON parameter space; the built-in ranges when absent.
    #[serde(default)]
    pub space_file: Option<PathBuf>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub sim: SimTemplate,
    pub phase1: PhaseConfig,
    #[serde(default)]
    pub screening: ScreenOptions,
    #[serde(default)]
    pub refine: RefineConfig,
    pub phase2: PhaseConfig,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    #[serde(default)]
    pub gsa: GsaConfig,
    #[serde(default)]
    pub explain: ExplainConfig,
    #[serde(default)]
    pub uq: UqConfig,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Everything that determines the outputs; the worker count does not.
#[derive(Serialize)]
struct HashedConfig<'a> {
    schema_version: u32,
    space: &'a ParameterSpace,
    sim: &'a SimTemplate,
    phase1: &'a PhaseConfig,
    screening: &'a ScreenOptions,
    refine: &'a RefineConfig,
    phase2: &'a PhaseConfig,
    surrogate: &'a SurrogateConfig,
    gsa: &'a GsaConfig,
    explain: &'a ExplainConfig,
    uq: &'a UqConfig,
}

#[derive(Serialize)]
struct Phase1Key<'a> {
    space: &'a ParameterSpace,
    sim: &'a SimTemplate,
    phase1: &'a PhaseConfig,
}

pub fn load_config(path: &Path) -> Result<PipelineConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut cfg: PipelineConfig = toml::from_str(&text).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", cfg.schema_version),
        }
        .into());
    }
    let base = path.parent().unwrap_or(Path::new("."));
    if cfg.output_dir.is_relative() {
        cfg.output_dir = base.join(&cfg.output_dir);
    }
    if let Some(s) = &cfg.space_file {
        if s.is_relative() {
            cfg.space_file = Some(base.join(s));
        }
    }
    Ok(cfg)
}

pub fn load_space(path: Option<&Path>) -> Result<ParameterSpace, Error> {
    match path {
        None => Ok(ParameterSpace::standard()),
        Some(p) => {
            if !p.exists() {
                return Err(Error::InvalidConfig(format!("space file {} does not exist", p.display())));
            }
            let space: ParameterSpace = read_json(p)?;
            space.validate()?;
            Ok(space)
        }
    }
}

fn check_dims(space: &ParameterSpace, cfg: &PipelineConfig) -> Result<(), Error> {
    let mut referenced: Vec<&str> = cfg.explain.dims.iter().map(String::as_str).collect();
    referenced.extend(cfg.explain.color_by.as_deref());
    if let Some(clips) = &cfg.refine.clips {
        referenced.extend(clips.iter().map(|c| c.dim.as_str()));
    }
    for name in referenced {
        if space.index_of(name).is_none() {
            return Err(Error::InvalidConfig(format!("dimension {name} is not in the space")));
        }
    }
    if cfg.workers == 0 {
        return Err(Error::InvalidConfig("workers must be at least 1".into()));
    }
    Ok(())
}

pub enum PipelineStatus {
    Complete,
    AwaitingClips,
}

fn stage<T>(name: &'static str, r: Result<T, Error>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Stage { stage: name, source: e })
}

fn mkdir(p: &Path) -> Result<(), CliError> {
    fs::create_dir_all(p).map_err(|e| {
        Error::Io {
            path: p.to_path_buf(),
            source: e,
        }
        .into()
    })
}

fn simulate_phase(
    space: &ParameterSpace,
    phase: &PhaseConfig,
    cfg: &PipelineConfig,
    dir: &Path,
    prov: &Provenance,
    reuse_key: Option<&str>,
) -> Result<Dataset, CliError> {
    let data_path = dir.join("dataset.csv");
    if let Some(key) = reuse_key {
        if let Ok(existing) = read_json::<serde_json::Value>(&sidecar_path(&data_path)) {
            let same = existing
                .pointer("/provenance/config_hash")
                .and_then(|v| v.as_str())
                .is_some_and(|h| h == key);
            if same {
                eprintln!("reusing {}", data_path.display());
                return stage("simulate", load_dataset(&data_path));
            }
        }
    }
    let design = stage("design", lhs_sample(space, phase.configs, phase.design_seed))?;
    let design = ecozoom::space::Design {
        seeds: phase.seeds.clone(),
        ..design
    };
    stage("design", save_design(&dir.join("design.csv"), &design, Some(prov)))?;
    let rows = expand_replicates(&design, &phase.seeds);
    let total = rows.len();
    let step = (total / 20).max(1);
    let progress = move |done: usize, total: usize| {
        if done % step == 0 || done == total {
            eprintln!("  simulated {done}/{total}");
        }
    };
    let (mut ds, summary) = stage("simulate", run_batch(space, &rows, &cfg.sim, cfg.workers, Some(&progress)))?;
    ds.meta.design_seed = Some(phase.design_seed);
    eprintln!(
        "  {} runs in {:.1}s ({:.1} ms mean per run)",
        summary.runs,
        summary.elapsed.as_secs_f64(),
        summary.mean_run_time.as_secs_f64() * 1e3
    );
    stage("simulate", save_dataset(&data_path, &ds, Some(prov)))?;
    Ok(ds)
}

pub fn run_pipeline(cfg: &PipelineConfig, confirm_clips: bool) -> Result<PipelineStatus, CliError> {
    let space = stage("config", load_space(cfg.space_file.as_deref()))?;
    stage("config", check_dims(&space, cfg))?;
    let out = &cfg.output_dir;
    mkdir(out)?;
    let hash = digest(&HashedConfig {
        schema_version: cfg.schema_version,
        space: &space,
        sim: &cfg.sim,
        phase1: &cfg.phase1,
        screening: &cfg.screening,
        refine: &cfg.refine,
        phase2: &cfg.phase2,
        surrogate: &cfg.surrogate,
        gsa: &cfg.gsa,
        explain: &cfg.explain,
        uq: &cfg.uq,
    });
    let phase1_hash = digest(&Phase1Key {
        space: &space,
        sim: &cfg.sim,
        phase1: &cfg.phase1,
    });
    let mut seeds = cfg.phase1.seeds.clone();
    seeds.extend(&cfg.phase2.seeds);
    seeds.sort_unstable();
    seeds.dedup();
    let prov = Provenance::new(hash.clone(), seeds);
    write_artifact(&out.join("config.json"), &prov, cfg)?;

    eprintln!("phase 1: {} configs x {} seeds", cfg.phase1.configs, cfg.phase1.seeds.len());
    let p1 = out.join("phase1");
    mkdir(&p1)?;
    let prov1 = Provenance::new(phase1_hash.clone(), cfg.phase1.seeds.clone());
    let ds1 = simulate_phase(&space, &cfg.phase1, cfg, &p1, &prov1, Some(&phase1_hash))?;
    let screen_dir = p1.join("screening");
    mkdir(&screen_dir)?;
    let screened = stage("screen", stages::screen_all(&ds1, &cfg.screening, &screen_dir, &prov))?;
    stage("screen", write_atomic(&screen_dir.join("tree.txt"), screened.tree.text.as_bytes()))?;
    eprintln!("{}", stages::describe_aleatoric(&screened.aleatoric));
    eprintln!("{}", stages::describe_anova(&screened.anova, 5));
    if let Some(c) = &screened.chi2 {
        eprintln!("{}", stages::describe_chi2(c));
    }
    if let Some(n) = &screened.nstar {
        eprintln!("{}", stages::describe_nstar(n));
    }

    let (clips, source) = match &cfg.refine.clips {
        Some(c) => (c.clone(), "config"),
        None => (screened.refinement.suggestions.iter().map(|s| s.clip.clone()).collect(), "suggested"),
    };
    if cfg.refine.clips.is_none() && !(confirm_clips || cfg.refine.confirm) {
        write_regimes(&out.join("regimes.csv"), &prov, &[("phase1", &ds1)])?;
        eprintln!("suggested clips:\n{}", describe_clips(&screened.refinement));
        eprintln!("review phase1/screening/refinement.json, then rerun with --confirm-clips or set [refine] clips");
        return Ok(PipelineStatus::AwaitingClips);
    }
    let refined = stage("refine", refine_space(&space, &clips))?;
    write_artifact(
        &out.join("refined_space.json"),
        &prov,
        &AppliedRefinement {
            source: source.into(),
            clips: clips.clone(),
            space: refined.clone(),
            suggestions: screened.refinement.clone(),
        },
    )?;

    eprintln!("phase 2: {} configs x {} seeds", cfg.phase2.configs, cfg.phase2.seeds.len());
    let p2 = out.join("phase2");
    mkdir(&p2)?;
    let ds2 = simulate_phase(&refined, &cfg.phase2, cfg, &p2, &prov, None)?;
    write_regimes(&out.join("regimes.csv"), &prov, &[("phase1", &ds1), ("phase2", &ds2)])?;
    let screen2 = p2.join("screening");
    mkdir(&screen2)?;
    write_artifact(&screen2.join("aleatoric.json"), &prov, &ecozoom::screening::bayes_limit(&ds2))?;

    let sdir = p2.join("surrogate");
    mkdir(&sdir)?;
    eprintln!("training surrogate");
    let model = stage("surrogate", train_mlp(&ds2, &cfg.surrogate.hyper))?;
    stage("surrogate", save_model(&sdir.join("model.json"), &model))?;
    write_artifact(&sidecar_path(&sdir.join("model.json")), &prov, &model.meta)?;
    if cfg.surrogate.cv_folds >= 2 {
        eprintln!("cross-validating ({} folds)", cfg.surrogate.cv_folds);
        let cv = stage(
            "surrogate",
            cross_validate(&ds2, cfg.surrogate.cv_folds, cfg.surrogate.cv_seed, &cfg.surrogate.hyper),
        )?;
        write_artifact(&sdir.join("cv.json"), &prov, &cv)?;
    }

    let gdir = p2.join("gsa");
    mkdir(&gdir)?;
    eprintln!("Sobol analysis (M = {})", cfg.gsa.n_base);
    stage("gsa", stages::gsa(&model, &cfg.gsa.options(), &gdir, &prov))?;

    let edir = p2.join("explain");
    mkdir(&edir)?;
    for dim in &cfg.explain.dims {
        let path = edir.join(format!("pdp_ice_{dim}.csv"));
        stage("explain", stages::explain(&model, &ds2, dim, &cfg.explain.pdp(), &path, &prov))?;
    }

    let udir = p2.join("uq");
    mkdir(&udir)?;
    eprintln!("uncertainty decomposition");
    stage(
        "uq",
        stages::uq(&model, &ds2, &cfg.uq.options(), &cfg.explain.dims, &cfg.explain.pdp(), &udir, &prov),
    )?;

    let report = stage("report", render_report(out))?;
    stage("report", write_atomic(&out.join(REPORT_FILE), report.text.as_bytes()))?;
    let manifest = Manifest {
        config_hash: hash,
        files: EXPECTED.iter().filter(|f| out.join(f).exists()).map(|f| f.to_string()).collect(),
        missing: report.missing,
    };
    write_artifact(&out.join("manifest.json"), &prov, &manifest)?;
    Ok(PipelineStatus::Complete)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AppliedRefinement {
    pub source: String,
    pub clips: Vec<Clip>,
    pub space: ParameterSpace,
    pub suggestions: RefinementReport,
}

#[derive(Debug, Serialize)]
struct Manifest {
    config_hash: String,
    files: Vec<String>,
    missing: Vec<String>,
}
