//! Command-line entry points.
//!
//! Exit codes: 0 on success, 1 for validation errors (bad input files,
//! flags, config or plans), 2 for numeric failures (degenerate graphs,
//! non-finite losses, a failed gradient check).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;

use crate::checkpoint;
use crate::config::{resolve, RunConfig};
use crate::dataset;
use crate::error::{Error, Result};
use crate::experiment::{self, DataSource, ExperimentPlan, SyntheticSpec};
use crate::metrics;
use crate::model::{self, Mode, Variant};
use crate::seed::{self, derive_seed, stream};
use crate::training::{self, GradcheckOptions, LabelSet, TrainConfig};

#[derive(Parser, Debug)]
#[command(name = "learngraph", version, about = "GCN with an encoder-learned adjacency")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a two-cluster synthetic dataset (features.csv, labels.csv).
    Synth(SynthArgs),
    /// Train one model on a single split.
    Train(TrainArgs),
    /// Repeated cross-validation, label-budget sweeps and the ablation.
    Experiment(ExperimentArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 345)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = 512)]
    pub dim: usize,
    #[arg(long, default_value_t = experiment::BENCHMARK_SEPARATION)]
    pub separation: f64,
    #[arg(long, default_value_t = experiment::BENCHMARK_STD)]
    pub std: f64,
    #[arg(long, default_value_t = experiment::BENCHMARK_OFFSET)]
    pub offset: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct DatasetArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
}

/// Optimizer flags shared by `train` and `experiment`.
#[derive(Args, Debug, Clone, Default)]
pub struct OptimArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub dropout_keep: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Number of labeled nodes.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Fraction of nodes held out for evaluation; 0 evaluates on the
    /// unlabeled nodes instead.
    #[arg(long)]
    pub holdout: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExperimentMode {
    Cv,
    Sweep,
    Ablation,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum)]
    pub mode: ExperimentMode,
    /// Label budget for `cv` and `ablation`.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Comma-separated budgets for `sweep`.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<usize>>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
    pub variants: Option<Vec<Variant>>,
    /// Record runs that fail numerically and finish the rest; exits 2 if any
    /// failed.
    #[arg(long)]
    pub keep_going: bool,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub nodes: usize,
    #[arg(long, default_value_t = 8)]
    pub feature_dim: usize,
    /// Corrupt one adjoint rule to confirm the check can fail.
    #[arg(long)]
    pub break_backward: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Directory for eval.json and roc.csv; printed to stdout if absent.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses the process arguments, runs the command and maps the outcome to
/// an exit code.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Synth(args) => cmd_synth(&args).map(|_| ExitCode::SUCCESS),
        Command::Train(args) => cmd_train(&args).map(|_| ExitCode::SUCCESS),
        Command::Experiment(args) => cmd_experiment(&args),
        Command::Gradcheck(args) => cmd_gradcheck(&args),
        Command::Eval(args) => cmd_eval(&args).map(|_| ExitCode::SUCCESS),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        n_per_class: args.n_per_class,
        dim: args.dim,
        separation: args.separation,
        std: args.std,
        offset: args.offset,
        seed: args.seed,
    };
    let (features, labels) = experiment::generate_synthetic(&spec)?;
    ensure_dir(&args.out_dir)?;
    dataset::write_features(&args.out_dir.join("features.csv"), &features)?;
    dataset::write_labels(&args.out_dir.join("labels.csv"), &labels)?;
    println!(
        "N={} M={} seed={}",
        features.rows(),
        features.cols(),
        args.seed
    );
    Ok(())
}

fn train_config(optim: &OptimArgs, file: &RunConfig) -> TrainConfig {
    let d = TrainConfig::default();
    TrainConfig {
        learning_rate: resolve(optim.learning_rate, file.learning_rate, d.learning_rate),
        weight_decay: resolve(optim.weight_decay, file.weight_decay, d.weight_decay),
        epochs: resolve(optim.epochs, file.epochs, d.epochs),
        dropout_keep: resolve(optim.dropout_keep, file.dropout_keep, d.dropout_keep),
        seed: resolve(optim.seed, file.seed, d.seed),
        ..d
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    path.map(RunConfig::load).transpose().map(Option::unwrap_or_default)
}

/// Settings resolved for `train`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub train: TrainConfig,
    pub budget: usize,
    pub holdout: f64,
}

pub fn resolve_train_settings(args: &TrainArgs) -> Result<TrainSettings> {
    let file = load_config(args.optim.config.as_deref())?;
    let mut train = train_config(&args.optim, &file);
    train.gamma = resolve(args.gamma, file.gamma, 0.0);
    train.variant = resolve(args.variant, file.variant, Variant::Learnable);
    train.validate()?;
    let holdout = resolve(args.holdout, file.holdout, 0.1);
    if !(0.0..1.0).contains(&holdout) {
        return Err(Error::Config(format!("holdout must be in [0, 1), got {holdout}")));
    }
    Ok(TrainSettings {
        train,
        budget: resolve(args.budget, file.label_budget, 50),
        holdout,
    })
}

/// Holds out `fraction` of each class, rounded, so the evaluation set sees
/// both classes whenever the data has them.
fn stratified_holdout(labels: &LabelSet, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = seed::rng(seed);
    let (mut held_out, mut pool) = (Vec::new(), Vec::new());
    for class in [0, 1] {
        let mut nodes: Vec<usize> = (0..labels.len()).filter(|&i| labels.label(i) == class).collect();
        nodes.shuffle(&mut rng);
        let k = (fraction * nodes.len() as f64).round() as usize;
        held_out.extend_from_slice(&nodes[..k]);
        pool.extend_from_slice(&nodes[k..]);
    }
    held_out.sort_unstable();
    pool.sort_unstable();
    (held_out, pool)
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let settings = resolve_train_settings(args)?;
    let data = dataset::load_dataset(&args.data.features, &args.data.labels)?;
    let n = data.len();

    let (held_out, pool) = stratified_holdout(
        &data.labels,
        settings.holdout,
        derive_seed(settings.train.seed, &[stream::HOLDOUT]),
    );
    let n_holdout = held_out.len();
    if settings.budget == 0 || settings.budget > pool.len() {
        return Err(Error::Config(format!(
            "label budget {} must be between 1 and {} (N = {n}, {n_holdout} held out)",
            settings.budget,
            pool.len()
        )));
    }
    let labeled = experiment::sample_labeled(
        &pool,
        &data.labels,
        settings.budget,
        derive_seed(settings.train.seed, &[stream::LABELS]),
    )?;
    let train_labels = data.labels.with_labeled(&labeled);

    let mut eval_mask = vec![false; n];
    if held_out.is_empty() {
        for (i, m) in eval_mask.iter_mut().enumerate() {
            *m = !train_labels.is_labeled(i);
        }
        if eval_mask.iter().all(|m| !m) {
            eval_mask.fill(true);
        }
    } else {
        for &i in &held_out {
            eval_mask[i] = true;
        }
    }

    let outcome = training::train(&data.features, &train_labels, &settings.train)?;
    let out = model::forward(&outcome.params, &data.features, Mode::Eval, 0)?;
    let report = metrics::evaluate(&out.probabilities, &data.labels, &eval_mask)?;

    ensure_dir(&args.out_dir)?;
    checkpoint::save(&args.out_dir.join("checkpoint.json"), &outcome.params)?;
    let loss_path = args.out_dir.join("loss.csv");
    let loss_file = fs::File::create(&loss_path).map_err(|e| Error::io(&loss_path, e))?;
    training::write_loss_csv(&outcome.loss_history, loss_file)?;
    write_file(&args.out_dir.join("eval.json"), &report.to_json()?)?;
    write_file(&args.out_dir.join("roc.csv"), &report.roc_csv())?;
    println!(
        "trained {} epochs on {} labels: eval n={} auc={:.4} acc={:.4}",
        settings.train.epochs,
        labeled.len(),
        report.n_eval,
        report.auc,
        report.accuracy
    );
    Ok(())
}

pub fn resolve_plan(args: &ExperimentArgs) -> Result<(ExperimentPlan, Vec<usize>)> {
    let file = load_config(args.optim.config.as_deref())?;
    let mut plan = ExperimentPlan::new(DataSource::Files {
        features: args.data.features.clone(),
        labels: args.data.labels.clone(),
    });
    plan.train = train_config(&args.optim, &file);
    plan.master_seed = plan.train.seed;
    plan.keep_going = args.keep_going;
    plan.label_budget = resolve(args.budget, file.label_budget, plan.label_budget);
    plan.folds = resolve(args.folds, file.folds, plan.folds);
    plan.repeats = resolve(args.repeats, file.repeats, plan.repeats);
    plan.variants = resolve(args.variants.clone(), file.variants, plan.variants);
    let default_gammas = match args.mode {
        ExperimentMode::Ablation => vec![0.0, experiment::ABLATION_GAMMA],
        _ => vec![0.0],
    };
    plan.gammas = resolve(args.gammas.clone(), file.gammas, default_gammas);
    let budgets = match args.mode {
        ExperimentMode::Sweep => resolve(args.budgets.clone(), file.budgets, vec![plan.label_budget]),
        _ => vec![plan.label_budget],
    };
    Ok((plan, budgets))
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<ExitCode> {
    let (plan, budgets) = resolve_plan(args)?;
    let data = plan.source.load()?;
    // Fail on infeasible plans before the first training run.
    plan.check(data.len(), &budgets)?;
    if args.mode == ExperimentMode::Ablation && !plan.gammas.iter().any(|&g| g > 0.0) {
        return Err(Error::InfeasiblePlan(
            "ablation needs a positive gamma in --gammas".into(),
        ));
    }
    let report = match args.mode {
        ExperimentMode::Cv => experiment::run_cross_validation(&plan, &data)?,
        ExperimentMode::Sweep => experiment::run_label_sweep(&plan, &data, &budgets)?,
        ExperimentMode::Ablation => experiment::run_ablation(&plan, &data)?,
    };
    ensure_dir(&args.out_dir)?;
    write_file(&args.out_dir.join("report.json"), &report.to_json()?)?;
    write_file(&args.out_dir.join("runs.csv"), &report.to_csv()?)?;
    for c in &report.cells {
        println!(
            "{:<16} budget={:<4} gamma={:<8} runs={:<4} auc={:.4}±{:.4} acc={:.4}±{:.4} sens={:.4} spec={:.4}",
            c.variant,
            c.budget,
            c.gamma,
            c.runs,
            c.auc.mean,
            c.auc.std,
            c.accuracy.mean,
            c.accuracy.std,
            c.sensitivity.mean,
            c.specificity.mean
        );
    }
    for f in &report.failures {
        eprintln!(
            "failed: {} budget={} gamma={} repeat={} fold={}: {}",
            f.variant, f.budget, f.gamma, f.repeat, f.fold, f.error
        );
    }
    Ok(if report.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<ExitCode> {
    if args.nodes < 3 || args.feature_dim == 0 {
        return Err(Error::Config(
            "gradcheck needs at least 3 nodes and 1 feature".into(),
        ));
    }
    let (features, labels) = training::gradcheck_instance(args.nodes, args.feature_dim, args.seed);
    let params = training::gradcheck_model(args.feature_dim, args.seed)?;
    let options = GradcheckOptions {
        break_backward: args.break_backward,
    };
    let report = training::gradcheck_params(&params, &features, &labels, args.gamma, options)?;
    for p in &report.params {
        println!(
            "{:<18} entries={:<3} max_rel_err={:.3e} max_abs_err={:.3e}",
            p.name, p.entries, p.max_rel_error, p.max_abs_error
        );
    }
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    println!(
        "{verdict}: max relative error {:.3e} (tolerance {:e})",
        report.max_rel_error(),
        training::GRADCHECK_TOLERANCE
    );
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let params = checkpoint::load(&args.checkpoint)?;
    let data = dataset::load_dataset(&args.data.features, &args.data.labels)?;
    let out = model::forward(&params, &data.features, Mode::Eval, 0)?;
    let report = metrics::evaluate(&out.probabilities, &data.labels, &vec![true; data.len()])?;
    match &args.out_dir {
        Some(dir) => {
            ensure_dir(dir)?;
            write_file(&dir.join("eval.json"), &report.to_json()?)?;
            write_file(&dir.join("roc.csv"), &report.roc_csv())?;
            println!(
                "n={} auc={:.4} acc={:.4}",
                report.n_eval, report.auc, report.accuracy
            );
        }
        None => println!("{}", report.to_json()?),
    }
    Ok(())
}
