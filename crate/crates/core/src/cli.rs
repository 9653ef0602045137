//! Command-line entry points: `adapt`, `gradcheck`, `synth`, `sweep`, `eval`.
//!
//! A run is described by a JSON config file mirroring [`RunConfig`]; CLI
//! flags override file values. Every run writes a `resolved_config.json`
//! capturing all defaults, and re-running from that file reproduces the
//! outputs byte-identically. Exit codes: 1 config error, 2 data error,
//! 3 numeric error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::adapt::{
    self, composed_meta_loss, inner_update, meta_gradient, BatchLoss, GradMode, LrStep, MetaConfig,
    Variant,
};
use crate::autodiff::{finite_diff_gradient, relative_error};
use crate::checkpoint;
use crate::data::{self, featurize_dataset, SplitSpec, SynthConfig};
use crate::error::{Error, Result};
use crate::eval::{self, Metrics};
use crate::model::{self, ModelSlots, ModelSpec};

/// Everything one `adapt` run needs, in one serializable bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub source: PathBuf,
    pub target: PathBuf,
    pub out_dir: PathBuf,
    pub split: SplitSpec,
    pub model: ModelSpec,
    pub meta: MetaConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.source.as_os_str().is_empty() {
            return Err(Error::Config("no source dataset path given".into()));
        }
        if self.target.as_os_str().is_empty() {
            return Err(Error::Config("no target dataset path given".into()));
        }
        if self.out_dir.as_os_str().is_empty() {
            return Err(Error::Config("no out_dir given".into()));
        }
        self.split.validate()?;
        self.model.validate()?;
        self.meta.validate()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "metaadapt",
    about = "Few-shot domain adaptation experiments",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Adapt a model from a source corpus to a target corpus and report
    /// target-test metrics.
    Adapt(AdaptArgs),
    /// Verify second-order meta gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic domain-shift corpus pair.
    Synth(SynthArgs),
    /// Run `adapt` over a hyperparameter grid and aggregate a sweep.csv.
    Sweep(SweepArgs),
    /// Evaluate a saved parameter checkpoint on a dataset.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct AdaptArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Few-shot examples per class taken from the target validation set.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub variant: Option<Variant>,
    #[arg(long, alias = "tasks")]
    pub n_tasks: Option<usize>,
    #[arg(long)]
    pub inner_steps: Option<usize>,
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long)]
    pub beta0: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, alias = "iters")]
    pub n_iters: Option<usize>,
    #[arg(long)]
    pub validate_every: Option<usize>,
    #[arg(long)]
    pub task_batch: Option<usize>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub hash_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub ngram_orders: Option<Vec<usize>>,
}

impl AdaptArgs {
    /// File config (or defaults) with flag overrides applied.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.source {
            cfg.source = v.clone();
        }
        if let Some(v) = &self.target {
            cfg.target = v.clone();
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = self.k {
            cfg.split.k = v;
        }
        if let Some(v) = self.variant {
            cfg.meta.variant = v;
        }
        if let Some(v) = self.n_tasks {
            cfg.meta.n_tasks = v;
        }
        if let Some(v) = self.inner_steps {
            cfg.meta.inner_steps = v;
        }
        if let Some(v) = self.alpha0 {
            cfg.meta.alpha0 = v;
        }
        if let Some(v) = self.beta0 {
            cfg.meta.beta0 = v;
        }
        if let Some(v) = self.tau {
            cfg.meta.tau = v;
        }
        if let Some(v) = self.n_iters {
            cfg.meta.n_iters = v;
        }
        if let Some(v) = self.validate_every {
            cfg.meta.validate_every = v;
        }
        if let Some(v) = self.task_batch {
            cfg.meta.task_batch = v;
        }
        if let Some(v) = self.weight_decay {
            cfg.meta.weight_decay = v;
        }
        if let Some(v) = self.seed {
            cfg.meta.seed = v;
        }
        if let Some(v) = self.hash_dim {
            cfg.model.hash_dim = v;
        }
        if let Some(v) = self.hidden_dim {
            cfg.model.hidden_dim = v;
        }
        if let Some(v) = &self.ngram_orders {
            cfg.model.ngram_orders = v.clone();
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Number of seeded (task, meta-task) draws.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 3)]
    pub inner_steps: usize,
    #[arg(long, default_value_t = 4)]
    pub task_batch: usize,
    #[arg(long, default_value_t = 16)]
    pub hash_dim: usize,
    #[arg(long, default_value_t = 4)]
    pub hidden_dim: usize,
    /// Meta-task examples per class.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub alpha0: f64,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    /// Gradient mode under test; `first-order` documents the discrepancy the
    /// exact mode avoids.
    #[arg(long, value_enum, default_value_t = GradcheckMode::SecondOrder)]
    pub mode: GradcheckMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GradcheckMode {
    SecondOrder,
    FirstOrder,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    #[arg(long, default_value_t = 600)]
    pub n_source: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_target: usize,
    #[arg(long, default_value_t = 0.7)]
    pub target_pos_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub base: AdaptArgs,
    /// Grid values; repeat the flag for each value.
    #[arg(long = "grid-tau", num_args = 1..)]
    pub grid_tau: Vec<f64>,
    #[arg(long = "grid-alpha0", num_args = 1..)]
    pub grid_alpha0: Vec<f64>,
    #[arg(long = "grid-beta0", num_args = 1..)]
    pub grid_beta0: Vec<f64>,
    #[arg(long = "grid-k", num_args = 1..)]
    pub grid_k: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Parameter checkpoint written by `adapt`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// JSONL dataset to evaluate on.
    #[arg(long)]
    pub data: PathBuf,
    /// N-gram orders used when featurizing (must match training).
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2])]
    pub ngram_orders: Vec<usize>,
}

/// Dispatch a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Adapt(args) => args.resolve().and_then(|cfg| cmd_adapt(&cfg).map(|_| 0)),
        Command::Gradcheck(args) => cmd_gradcheck(&args),
        Command::Synth(args) => cmd_synth(&args).map(|_| 0),
        Command::Sweep(args) => cmd_sweep(&args).map(|_| 0),
        Command::Eval(args) => cmd_eval(&args).map(|_| 0),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

/// Load, preprocess, split, adapt, evaluate on the target test split, and
/// write `history.csv`, `final_metrics.csv`, `checkpoint.madp` and
/// `resolved_config.json` to the out dir. Returns the final test metrics.
pub fn cmd_adapt(cfg: &RunConfig) -> Result<Metrics> {
    cfg.validate()?;
    let source = data::preprocess_dataset(&data::load_jsonl(&cfg.source)?);
    let target = data::preprocess_dataset(&data::load_jsonl(&cfg.target)?);

    let (source_train, source_valid, _) = data::split(&source, &cfg.split, cfg.meta.seed)?;
    let (_, target_valid, target_test) = data::split(&target, &cfg.split, cfg.meta.seed)?;

    let source_train_f = featurize_dataset(&source_train, &cfg.model);
    let test_f = featurize_dataset(&target_test, &cfg.model);

    let result = if cfg.split.k == 0 {
        // 0-shot: no target labels exist, so train on the source alone and
        // select on the source validation split
        let valid_f = featurize_dataset(&source_valid, &cfg.model);
        adapt::run_source_supervised(&source_train_f, &valid_f, &cfg.model, &cfg.meta)?
    } else {
        let (meta_task, valid_rest) = data::select_k_shot(&target_valid, cfg.split.k, &cfg.model)?;
        let valid_f = featurize_dataset(&valid_rest, &cfg.model);
        adapt::run_metaadapt(&source_train_f, &meta_task, &valid_f, &cfg.model, &cfg.meta)?
    };

    let final_metrics = eval::evaluate_featurized(&result.best, &test_f)?;

    std::fs::create_dir_all(&cfg.out_dir)?;
    eval::report_csv(&result.history, cfg.out_dir.join("history.csv"))?;
    eval::final_metrics_csv(&final_metrics, cfg.out_dir.join("final_metrics.csv"))?;
    checkpoint::write_params(&result.best, cfg.out_dir.join("checkpoint.madp"))?;
    let resolved = serde_json::to_string_pretty(cfg).expect("config serializes");
    std::fs::write(cfg.out_dir.join("resolved_config.json"), resolved + "\n")?;
    Ok(final_metrics)
}

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
const GRADCHECK_MAX_PARAMS: usize = 200;

/// Compare meta gradients against central finite differences of the composed
/// map θ ↦ L(Alg(θ), X'ₜ) on seeded synthetic draws. Returns the per-seed
/// relative errors.
pub fn gradcheck_errors(args: &GradcheckArgs) -> Result<Vec<f64>> {
    let spec = ModelSpec {
        hash_dim: args.hash_dim,
        hidden_dim: args.hidden_dim,
        n_classes: 2,
        ngram_orders: vec![1, 2],
    };
    spec.validate()?;
    let n_params = spec.n_params(args.inner_steps);
    if n_params > GRADCHECK_MAX_PARAMS {
        return Err(Error::Config(format!(
            "gradcheck model has {n_params} parameters; at most {GRADCHECK_MAX_PARAMS} allowed"
        )));
    }
    if !(args.step > 0.0) {
        return Err(Error::Config("step must be positive".into()));
    }
    let mode = match args.mode {
        GradcheckMode::SecondOrder => GradMode::SecondOrder,
        GradcheckMode::FirstOrder => GradMode::FirstOrder,
    };

    let mut errors = Vec::with_capacity(args.seeds as usize);
    for seed in 0..args.seeds {
        let synth = SynthConfig {
            vocab_size: 32,
            overlap: 0.5,
            n_source: 200,
            n_target: 200,
            target_pos_rate: 0.5,
            seed,
        };
        let (source, target) = data::synth_shift_generate(&synth)?;
        let source_f = featurize_dataset(&source, &spec);
        let (meta_task, _) = data::select_k_shot(&target, args.k, &spec)?;

        let theta = model::init_params(&spec, args.inner_steps, args.alpha0, seed)?;
        let slots = ModelSlots::resolve(theta.layout())?;
        let lr_range = theta.layout().range(model::segments::INNER_LR)?;
        let lrs: Vec<LrStep> = lr_range.map(LrStep::Param).collect();

        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let task = data::sample_source_task(&source_f, args.task_batch, &mut rng)?;
        let task_loss = BatchLoss {
            slots: &slots,
            batch: &task.batch,
        };
        let meta_loss = BatchLoss {
            slots: &slots,
            batch: &meta_task.examples,
        };

        let mut trace = inner_update(&theta, &task_loss, &lrs)?;
        let (_, grad) = meta_gradient(&mut trace, &meta_loss, mode)?;
        let fd = finite_diff_gradient(
            |p| composed_meta_loss(p, &task_loss, &lrs, &meta_loss),
            &theta,
            args.step,
        )?;
        errors.push(relative_error(grad.values(), fd.values()));
    }
    Ok(errors)
}

/// CLI wrapper around [`gradcheck_errors`]; exit 0 iff the max relative
/// error is within tolerance.
pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<i32> {
    let errors = gradcheck_errors(args)?;
    let mut max_err: f64 = 0.0;
    for (seed, err) in errors.iter().enumerate() {
        println!("seed {seed}: relative error {err:.3e}");
        max_err = max_err.max(*err);
    }
    println!("max relative error {max_err:.3e} over {} seeds", args.seeds);
    if max_err <= GRADCHECK_TOLERANCE {
        println!("gradcheck PASS (tolerance {GRADCHECK_TOLERANCE:.0e})");
        Ok(0)
    } else {
        println!("gradcheck FAIL (tolerance {GRADCHECK_TOLERANCE:.0e})");
        Ok(1)
    }
}

/// Generate and write `source.jsonl` / `target.jsonl`.
pub fn cmd_synth(args: &SynthArgs) -> Result<(PathBuf, PathBuf)> {
    let cfg = SynthConfig {
        vocab_size: args.vocab_size,
        overlap: args.overlap,
        n_source: args.n_source,
        n_target: args.n_target,
        target_pos_rate: args.target_pos_rate,
        seed: args.seed,
    };
    let (source, target) = data::synth_shift_generate(&cfg)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let source_path = args.out_dir.join("source.jsonl");
    let target_path = args.out_dir.join("target.jsonl");
    data::write_jsonl(&source, &source_path)?;
    data::write_jsonl(&target, &target_path)?;
    println!(
        "wrote {} ({} examples) and {} ({} examples)",
        source_path.display(),
        source.len(),
        target_path.display(),
        target.len()
    );
    Ok((source_path, target_path))
}

fn sanitize_csv_field(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// Run `adapt` once per grid point (cartesian over the given axes) and write
/// one `sweep.csv` row per point. Per-point failures are recorded in the row
/// and the sweep continues.
pub fn cmd_sweep(args: &SweepArgs) -> Result<PathBuf> {
    let base = args.base.resolve()?;
    base.validate()?;
    // an entirely empty grid means zero points (header-only sweep.csv);
    // otherwise unlisted axes stay at their base value
    let no_grid = args.grid_tau.is_empty()
        && args.grid_alpha0.is_empty()
        && args.grid_beta0.is_empty()
        && args.grid_k.is_empty();
    let taus = if args.grid_tau.is_empty() {
        vec![base.meta.tau]
    } else {
        args.grid_tau.clone()
    };
    let alphas = if args.grid_alpha0.is_empty() {
        vec![base.meta.alpha0]
    } else {
        args.grid_alpha0.clone()
    };
    let betas = if args.grid_beta0.is_empty() {
        vec![base.meta.beta0]
    } else {
        args.grid_beta0.clone()
    };
    let ks = if args.grid_k.is_empty() {
        vec![base.split.k]
    } else {
        args.grid_k.clone()
    };

    std::fs::create_dir_all(&base.out_dir)?;
    let mut rows = String::from("tau,alpha0,beta0,k,ba,acc,f1,n,error\n");
    let mut point = 0usize;
    if no_grid {
        let path = base.out_dir.join("sweep.csv");
        std::fs::write(&path, rows)?;
        println!("wrote {} (0 grid points)", path.display());
        return Ok(path);
    }
    for &tau in &taus {
        for &alpha0 in &alphas {
            for &beta0 in &betas {
                for &k in &ks {
                    let mut cfg = base.clone();
                    cfg.meta.tau = tau;
                    cfg.meta.alpha0 = alpha0;
                    cfg.meta.beta0 = beta0;
                    cfg.split.k = k;
                    cfg.out_dir = base.out_dir.join(format!("point_{point:03}"));
                    let prefix = format!("{tau},{alpha0},{beta0},{k}");
                    match cmd_adapt(&cfg) {
                        Ok(m) => rows.push_str(&format!(
                            "{prefix},{:.6},{:.6},{:.6},{},\n",
                            m.ba, m.acc, m.f1, m.n
                        )),
                        Err(e) => rows.push_str(&format!(
                            "{prefix},,,,,{}\n",
                            sanitize_csv_field(&e.to_string())
                        )),
                    }
                    point += 1;
                }
            }
        }
    }
    let path = base.out_dir.join("sweep.csv");
    std::fs::write(&path, rows)?;
    println!("wrote {} ({point} grid points)", path.display());
    Ok(path)
}

/// Evaluate a checkpoint on a JSONL dataset; prints metrics as CSV.
pub fn cmd_eval(args: &EvalArgs) -> Result<Metrics> {
    let params = checkpoint::read_params(&args.checkpoint)?;
    let slots = ModelSlots::resolve(params.layout())?;
    let spec = ModelSpec {
        hash_dim: slots.hash_dim(),
        hidden_dim: slots.hidden_dim(),
        n_classes: slots.n_classes(),
        ngram_orders: args.ngram_orders.clone(),
    };
    spec.validate()?;
    let ds = data::preprocess_dataset(&data::load_jsonl(&args.data)?);
    let metrics = eval::evaluate(&params, &spec, &ds)?;
    println!("ba,acc,f1,n");
    println!(
        "{:.6},{:.6},{:.6},{}",
        metrics.ba, metrics.acc, metrics.f1, metrics.n
    );
    Ok(metrics)
}
