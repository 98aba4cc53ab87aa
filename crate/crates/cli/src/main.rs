//! `ecozoom` command-line driver.

mod artifacts;
mod pipeline;
mod report;
mod stages;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ecozoom::analysis::{PdpOptions, SecondOrder, SobolOptions, UqOptions};
use ecozoom::forest::ForestParams;
use ecozoom::io::{load_dataset, load_design, save_dataset, save_design, write_csv, Provenance};
use ecozoom::runner::run_batch;
use ecozoom::screening::{anova_type2, bayes_limit, chi2_seed_independence, required_replicates};
use ecozoom::sim::SimTemplate;
use ecozoom::space::{lhs_sample, refine_space, Clip, ParamVector};
use ecozoom::surrogate::{cross_validate, load_model, save_model, train_mlp, TrainHyper};
use ecozoom::Error;
use serde::Serialize;

use crate::artifacts::{digest, write_artifact};
use crate::pipeline::{load_config, load_space, run_pipeline, PipelineStatus};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        let core = match self {
            CliError::Core(e) | CliError::Stage { source: e, .. } => e,
            CliError::Usage(_) => return 1,
        };
        if core.is_data_error() {
            2
        } else {
            3
        }
    }
}

#[derive(Parser)]
#[command(name = "ecozoom", version, about = "Two-phase exploration of a stochastic predator-prey model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Latin hypercube design over a parameter space.
    Design(DesignArgs),
    /// Run the simulator over every design row.
    Simulate(SimulateArgs),
    /// Phase-1 screening analyses.
    Screen {
        #[command(subcommand)]
        analysis: ScreenCommand,
    },
    /// Train, cross-validate or query the MLP surrogate.
    Surrogate {
        #[command(subcommand)]
        action: SurrogateCommand,
    },
    /// Global sensitivity analysis on a trained surrogate.
    Gsa {
        #[command(subcommand)]
        method: GsaCommand,
    },
    /// Partial dependence and ICE curves.
    Explain {
        #[command(subcommand)]
        method: ExplainCommand,
    },
    /// Aleatoric and epistemic uncertainty.
    Uq {
        #[command(subcommand)]
        method: UqCommand,
    },
    /// Run every stage from a TOML config.
    Pipeline(PipelineArgs),
    /// Summarise a pipeline output directory.
    Report { outdir: PathBuf },
}

#[derive(Args, Serialize)]
struct DesignArgs {
    /// JSON parameter space; the built-in ranges when omitted.
    #[arg(long)]
    space: Option<PathBuf>,
    #[arg(long)]
    n: usize,
    /// Comma-separated replicate seeds.
    #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3, 4, 5])]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 0)]
    design_seed: u64,
    /// Narrow a dimension, as DIM=LO:HI. Repeatable.
    #[arg(long, value_parser = parse_clip)]
    clip: Vec<Clip>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    design: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    #[arg(long)]
    ticks: Option<u32>,
    #[arg(long)]
    grid: Option<usize>,
    /// TOML or JSON file with simulator constants.
    #[arg(long)]
    sim: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct DataOut {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ScreenCommand {
    /// Median-agreement accuracy ceiling.
    Aleatoric(DataOut),
    /// Type II ANOVA variance shares.
    Anova(DataOut),
    /// Chi-square test of outcome against replicate seed.
    Chi2(DataOut),
    /// Shallow regression tree and its threshold rules.
    Tree(TreeArgs),
    /// Replicates needed for a target precision.
    Nstar(NstarArgs),
}

#[derive(Args, Serialize)]
struct TreeArgs {
    #[command(flatten)]
    io: DataOut,
    #[arg(long, default_value_t = 3)]
    max_depth: usize,
    #[arg(long, default_value_t = 20)]
    min_leaf: usize,
    /// Leaves with mean score at or below this suggest clips.
    #[arg(long, default_value_t = 0.2)]
    clip_cutoff: f64,
}

#[derive(Args, Serialize)]
struct NstarArgs {
    #[command(flatten)]
    io: DataOut,
    #[arg(long, default_value_t = 1.96)]
    z: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
}

#[derive(Args, Serialize)]
struct HyperArgs {
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [128usize, 128])]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    train_seed: u64,
    /// Weight classes by inverse frequency.
    #[arg(long)]
    class_weights: bool,
}

impl HyperArgs {
    fn hyper(&self) -> TrainHyper {
        TrainHyper {
            hidden: self.hidden.clone(),
            l2_lambda: self.l2,
            epochs: self.epochs,
            batch: self.batch,
            lr: self.lr,
            train_seed: self.train_seed,
            class_weights: self.class_weights,
        }
    }
}

#[derive(Subcommand)]
enum SurrogateCommand {
    Train(TrainArgs),
    Cv(CvArgs),
    /// Class probabilities for every point of a design file.
    Predict(PredictArgs),
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Args, Serialize)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    cv_seed: u64,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Args, Serialize)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    design: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum Order {
    #[value(name = "1")]
    First,
    Total,
    #[value(name = "2")]
    Second,
}

#[derive(Subcommand)]
enum GsaCommand {
    Sobol(SobolArgs),
}

#[derive(Args, Serialize)]
struct SobolArgs {
    #[arg(long)]
    model: PathBuf,
    /// Integrate over this space instead of the model's own.
    #[arg(long)]
    space: Option<PathBuf>,
    /// Base sample size.
    #[arg(short = 'M', long = "base-samples", default_value_t = 16384)]
    m: usize,
    #[arg(long, value_enum, default_value = "2")]
    order: Order,
    /// Second-order indices for every pair rather than the top six by total effect.
    #[arg(long)]
    all_pairs: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bootstrap resamples for percentile intervals.
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ExplainCommand {
    PdpIce(PdpArgs),
}

#[derive(Args, Serialize)]
struct PdpArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    dim: String,
    #[arg(long)]
    color_by: Option<String>,
    #[arg(long, default_value_t = 40)]
    grid: usize,
    #[arg(long, default_value_t = 200)]
    ice: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum UqCommand {
    Decompose(UqArgs),
}

#[derive(Args, Serialize)]
struct UqArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.25)]
    calibration_fraction: f64,
    /// Scale conformal scores by the local aleatoric spread.
    #[arg(long)]
    locally_weighted: bool,
    /// Dimensions to profile. Repeatable.
    #[arg(long)]
    dim: Vec<String>,
    #[arg(long, default_value_t = 40)]
    grid: usize,
    #[arg(long, default_value_t = 200)]
    ice: usize,
    #[arg(long, default_value_t = 200)]
    trees: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    /// Apply the suggested clips and continue into phase 2.
    #[arg(long)]
    confirm_clips: bool,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_clip(s: &str) -> Result<Clip, String> {
    let (dim, range) = s.split_once('=').ok_or("expected DIM=LO:HI")?;
    let (lo, hi) = range.split_once(':').ok_or("expected DIM=LO:HI")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
    Ok(Clip::new(dim.trim(), lo, hi))
}

fn provenance<T: Serialize>(args: &T, seeds: Vec<u64>) -> Provenance {
    Provenance::new(digest(args), seeds)
}

fn ensure_parent(path: &Path) -> Result<(), Error> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn read_template(path: &Path) -> Result<SimTemplate, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let schema = |message: String| Error::Schema {
        path: path.to_path_buf(),
        message,
    };
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| schema(e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| schema(e.to_string()))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Design(a) => {
            let space = load_space(a.space.as_deref())?;
            let space = refine_space(&space, &a.clip)?;
            let mut design = lhs_sample(&space, a.n, a.design_seed)?;
            design.seeds = a.seeds.clone();
            ensure_parent(&a.out)?;
            save_design(&a.out, &design, Some(&provenance(&a, a.seeds.clone())))?;
            eprintln!("wrote {} points x {} seeds to {}", a.n, a.seeds.len(), a.out.display());
        }
        Command::Simulate(a) => {
            let design = load_design(&a.design)?;
            let mut template = match &a.sim {
                Some(p) => read_template(p)?,
                None => SimTemplate::default(),
            };
            if let Some(t) = a.ticks {
                template.max_ticks = t;
            }
            if let Some(g) = a.grid {
                template.grid_side = g;
            }
            let rows = design.rows();
            let (mut ds, summary) = run_batch(&design.space, &rows, &template, a.workers, None)?;
            ds.meta.design_seed = Some(design.design_seed);
            ensure_parent(&a.out)?;
            let prov = Provenance::new(
                digest(&(&design.space, &design.points, &design.seeds, &template)),
                design.seeds.clone(),
            );
            save_dataset(&a.out, &ds, Some(&prov))?;
            eprintln!(
                "{} runs on {} workers in {:.1}s",
                summary.runs,
                summary.workers,
                summary.elapsed.as_secs_f64()
            );
        }
        Command::Screen { analysis } => screen(analysis)?,
        Command::Surrogate { action } => surrogate(action)?,
        Command::Gsa {
            method: GsaCommand::Sobol(a),
        } => {
            let model = load_model(&a.model)?;
            let mut model_space = model.clone();
            if let Some(p) = &a.space {
                let space = load_space(Some(p))?;
                if space.names() != model.space.names() {
                    return Err(Error::InvalidConfig(format!(
                        "space {} does not match the model's dimensions",
                        p.display()
                    ))
                    .into());
                }
                model_space.space = space;
            }
            let opts = SobolOptions {
                n_base: a.m,
                second_order: match (a.order, a.all_pairs) {
                    (Order::Second, true) => SecondOrder::All,
                    (Order::Second, false) => SecondOrder::TopTotal(6),
                    _ => SecondOrder::Off,
                },
                bootstrap: a.bootstrap,
                seed: a.seed,
            };
            std::fs::create_dir_all(&a.out).map_err(|e| Error::Io {
                path: a.out.clone(),
                source: e,
            })?;
            let s = stages::gsa(&model_space, &opts, &a.out, &provenance(&a, vec![a.seed]))?;
            for i in s.ranked_by_total() {
                println!("{:<4} S1 {:>8.4}  ST {:>8.4}", s.names[i], s.s1[i], s.st[i]);
            }
            println!("sum S1 {:.4}", s.sum_s1());
        }
        Command::Explain {
            method: ExplainCommand::PdpIce(a),
        } => {
            let model = load_model(&a.model)?;
            let ds = load_dataset(&a.data)?;
            let opts = PdpOptions {
                grid_size: a.grid,
                ice_subsample: a.ice,
                color_dim: a.color_by.clone(),
                seed: a.seed,
            };
            ensure_parent(&a.out)?;
            stages::explain(&model, &ds, &a.dim, &opts, &a.out, &provenance(&a, vec![a.seed]))?;
        }
        Command::Uq {
            method: UqCommand::Decompose(a),
        } => {
            let model = load_model(&a.model)?;
            let ds = load_dataset(&a.data)?;
            let opts = UqOptions {
                alpha: a.alpha,
                calibration_fraction: a.calibration_fraction,
                forest: ForestParams {
                    n_trees: a.trees,
                    seed: a.seed,
                    ..ForestParams::default()
                },
                locally_weighted: a.locally_weighted,
                seed: a.seed,
            };
            let pdp = PdpOptions {
                grid_size: a.grid,
                ice_subsample: a.ice,
                color_dim: None,
                seed: a.seed,
            };
            std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::Io {
                path: a.out_dir.clone(),
                source: e,
            })?;
            let (summary, tipping) =
                stages::uq(&model, &ds, &opts, &a.dim, &pdp, &a.out_dir, &provenance(&a, vec![a.seed]))?;
            println!(
                "mean sigma: aleatoric {:.4} epistemic {:.4} total {:.4}",
                summary.mean_sigma_aleatoric, summary.mean_sigma_epistemic, summary.mean_sigma_total
            );
            for t in tipping {
                println!("{} {:?} at {:.4} (magnitude {:.4})", t.dim, t.kind, t.value, t.magnitude);
            }
        }
        Command::Pipeline(a) => {
            let cfg = load_config(&a.config)?;
            match run_pipeline(&cfg, a.confirm_clips)? {
                PipelineStatus::Complete => eprintln!("done; see {}", cfg.output_dir.join(report::REPORT_FILE).display()),
                PipelineStatus::AwaitingClips => println!("paused after screening: clips await confirmation"),
            }
        }
        Command::Report { outdir } => {
            let r = report::render_report(&outdir)?;
            print!("{}", r.text);
            if !r.missing.is_empty() {
                eprintln!("{} expected artifacts are missing", r.missing.len());
            }
        }
    }
    Ok(())
}

fn screen(cmd: ScreenCommand) -> Result<(), CliError> {
    match cmd {
        ScreenCommand::Aleatoric(a) => {
            let ds = load_dataset(&a.data)?;
            let r = bayes_limit(&ds);
            ensure_parent(&a.out)?;
            write_artifact(&a.out, &provenance(&a, ds.seeds()), &r)?;
            println!("{}", stages::describe_aleatoric(&r));
        }
        ScreenCommand::Anova(a) => {
            let ds = load_dataset(&a.data)?;
            let r = anova_type2(&ds)?;
            ensure_parent(&a.out)?;
            write_artifact(&a.out, &provenance(&a, ds.seeds()), &r)?;
            println!("{}", stages::describe_anova(&r, r.per_factor.len()));
        }
        ScreenCommand::Chi2(a) => {
            let ds = load_dataset(&a.data)?;
            let r = chi2_seed_independence(&ds)?;
            ensure_parent(&a.out)?;
            write_artifact(&a.out, &provenance(&a, ds.seeds()), &r)?;
            println!("{}", stages::describe_chi2(&r));
        }
        ScreenCommand::Tree(a) => {
            let ds = load_dataset(&a.io.data)?;
            let t = stages::tree_report(&ds, a.max_depth, a.min_leaf);
            let suggestions = ecozoom::screening::suggest_clips(&t.rules, &ds.space, a.clip_cutoff);
            let refinement = stages::RefinementReport {
                cutoff: a.clip_cutoff,
                suggestions,
            };
            ensure_parent(&a.io.out)?;
            let prov = provenance(&a, ds.seeds());
            write_artifact(&a.io.out, &prov, &TreeWithClips { tree: &t, refinement: &refinement })?;
            println!("{}", t.text.trim_end());
            println!("{}", stages::describe_clips(&refinement));
        }
        ScreenCommand::Nstar(a) => {
            let ds = load_dataset(&a.io.data)?;
            let r = required_replicates(&ds, a.z, a.eps)?;
            ensure_parent(&a.io.out)?;
            write_artifact(&a.io.out, &provenance(&a, ds.seeds()), &r)?;
            println!("{}", stages::describe_nstar(&r));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct TreeWithClips<'a> {
    #[serde(flatten)]
    tree: &'a stages::TreeReport,
    refinement: &'a stages::RefinementReport,
}

fn surrogate(cmd: SurrogateCommand) -> Result<(), CliError> {
    match cmd {
        SurrogateCommand::Train(a) => {
            let ds = load_dataset(&a.data)?;
            let model = train_mlp(&ds, &a.hyper.hyper())?;
            ensure_parent(&a.model)?;
            save_model(&a.model, &model)?;
            println!(
                "trained on {} runs: loss {:.4}, train accuracy {:.4}",
                model.meta.n_samples, model.meta.final_loss, model.meta.train_accuracy
            );
        }
        SurrogateCommand::Cv(a) => {
            let ds = load_dataset(&a.data)?;
            let r = cross_validate(&ds, a.folds, a.cv_seed, &a.hyper.hyper())?;
            ensure_parent(&a.out)?;
            write_artifact(&a.out, &provenance(&a, ds.seeds()), &r)?;
            println!(
                "{}-fold accuracy {:.4} (majority share {:.4})",
                r.k, r.mean_accuracy, r.majority_share
            );
        }
        SurrogateCommand::Predict(a) => {
            let model = load_model(&a.model)?;
            let design = load_design(&a.design)?;
            if design.space.names() != model.space.names() {
                return Err(Error::InvalidConfig("design dimensions do not match the model".into()).into());
            }
            let mut header: Vec<String> = vec!["config_id".into()];
            header.extend(design.space.names().iter().map(|s| s.to_string()));
            header.extend(["p_extinct", "p_fox_extinct", "p_coexist", "extrapolated"].map(String::from));
            let rows: Vec<Vec<String>> = design
                .points
                .iter()
                .enumerate()
                .map(|(i, p): (usize, &ParamVector)| {
                    let pred = model.predict(p);
                    let mut row = vec![i.to_string()];
                    row.extend(p.0.iter().map(f64::to_string));
                    row.extend(pred.proba.iter().map(f64::to_string));
                    row.push(pred.extrapolated.to_string());
                    row
                })
                .collect();
            ensure_parent(&a.out)?;
            write_csv(&a.out, &header, &rows, Some(&provenance(&a, vec![])))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

