//! The meta-adaptation algorithm: inner-loop SGD recorded differentiably,
//! second-order meta gradients through the unrolled updates, cosine-similarity
//! task scores, tempered-softmax gradient rescaling, and the decoupled
//! adaptive-moment outer update — plus the baseline and ablation variants.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::autodiff::{Graph, NodeId};
use crate::data::{sample_source_task, Featurized, MetaTask};
use crate::error::{Error, Result};
use crate::eval::{evaluate_featurized, ValidationPoint};
use crate::model::{self, ModelSlots, ModelSpec};
use crate::params::{GradientVector, ParameterVector};

/// Algorithm variant: the full method, its ablations, and the baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Similarity-weighted second-order meta adaptation with learnable
    /// per-step inner LRs.
    Full,
    /// Uniform task weights instead of tempered-softmax similarity weights.
    NoSimilarity,
    /// Inner LRs frozen at the cosine-annealed schedule value.
    NoAdaptiveLr,
    /// Meta gradients taken at the adapted parameters (dφ/dθ ≈ identity).
    FirstOrder,
    /// Uniform task weights; otherwise identical to `full`.
    Maml,
    /// Plain supervised steps on the meta task; source tasks ignored.
    NaiveFinetune,
}

impl Variant {
    fn uses_similarity_weights(self) -> bool {
        matches!(
            self,
            Variant::Full | Variant::NoAdaptiveLr | Variant::FirstOrder
        )
    }

    fn adaptive_lr(self) -> bool {
        matches!(
            self,
            Variant::Full | Variant::NoSimilarity | Variant::FirstOrder | Variant::Maml
        )
    }

    fn gradient_mode(self) -> GradMode {
        if self == Variant::FirstOrder {
            GradMode::FirstOrder
        } else {
            GradMode::SecondOrder
        }
    }
}

/// Hyperparameters of one adaptation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaConfig {
    pub n_tasks: usize,
    pub inner_steps: usize,
    pub alpha0: f64,
    pub beta0: f64,
    pub tau: f64,
    pub n_iters: usize,
    pub validate_every: usize,
    pub task_batch: usize,
    pub variant: Variant,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            n_tasks: 3,
            inner_steps: 3,
            alpha0: 1e-2,
            beta0: 1e-2,
            tau: 0.1,
            n_iters: 500,
            validate_every: 50,
            task_batch: 4,
            variant: Variant::Full,
            weight_decay: 0.01,
            seed: 0,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_tasks < 1 {
            return Err(Error::Config("n_tasks must be at least 1".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.alpha0 > 0.0) {
            return Err(Error::Config(format!(
                "alpha0 must be positive, got {}",
                self.alpha0
            )));
        }
        if !(self.beta0 > 0.0) {
            return Err(Error::Config(format!(
                "beta0 must be positive, got {}",
                self.beta0
            )));
        }
        if self.validate_every < 1 {
            return Err(Error::Config("validate_every must be at least 1".into()));
        }
        if self.task_batch < 1 {
            return Err(Error::Config("task_batch must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// How the meta gradient treats the inner loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradMode {
    /// Backpropagate through the recorded inner updates (exact).
    SecondOrder,
    /// Gradient at the adapted parameters only.
    FirstOrder,
}

/// A differentiable scalar objective emitted over a set of parameter nodes.
pub trait LossFn {
    fn emit(&self, g: &mut Graph, params: &[NodeId]) -> Result<NodeId>;
}

/// Mean cross-entropy of the model on a fixed batch.
pub struct BatchLoss<'a> {
    pub slots: &'a ModelSlots,
    pub batch: &'a [(crate::model::FeatureVector, u8)],
}

impl LossFn for BatchLoss<'_> {
    fn emit(&self, g: &mut Graph, params: &[NodeId]) -> Result<NodeId> {
        model::emit_loss(g, params, self.slots, self.batch)
    }
}

/// Per-step inner learning rate: either a learnable parameter (by flat
/// index) or a fixed schedule value.
#[derive(Debug, Clone, Copy)]
pub enum LrStep {
    Param(usize),
    Value(f64),
}

/// The recorded unrolled inner loop: start parameters θ, the differentiable
/// graph of every update, and the adapted parameters φ.
pub struct InnerTrace {
    graph: Graph,
    start: ParameterVector,
    end_ids: Vec<NodeId>,
    end: ParameterVector,
}

impl InnerTrace {
    pub fn start(&self) -> &ParameterVector {
        &self.start
    }

    pub fn end(&self) -> &ParameterVector {
        &self.end
    }

    /// The task gradient φ − θ.
    pub fn task_displacement(&self) -> GradientVector {
        let values = self
            .end
            .values()
            .iter()
            .zip(self.start.values())
            .map(|(e, s)| e - s)
            .collect();
        GradientVector::new(Arc::clone(self.start.layout()), values)
            .expect("end and start share a layout")
    }
}

/// Run `lrs.len()` recorded gradient-descent steps of `loss` from `theta`:
/// φ ← φ − α_j ∇_φ L(φ). Every step is emitted as differentiable nodes; no
/// weight decay is applied inside the inner loop. Parameters whose gradient
/// is structurally zero keep their node untouched.
pub fn inner_update(
    theta: &ParameterVector,
    loss: &dyn LossFn,
    lrs: &[LrStep],
) -> Result<InnerTrace> {
    let mut graph = Graph::with_leaves(theta.values());
    let mut phi: Vec<NodeId> = graph.leaf_ids();
    for (step, lr) in lrs.iter().enumerate() {
        let loss_node = loss.emit(&mut graph, &phi)?;
        if !graph.value(loss_node).is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite inner loss at step {step}"
            )));
        }
        let adj = graph.backward_nodes(loss_node)?;
        let lr_node = match lr {
            LrStep::Param(i) => phi[*i],
            LrStep::Value(v) => graph.constant(*v),
        };
        for (p, slot) in phi.iter_mut().enumerate() {
            if let Some(grad_node) = adj[*slot as usize] {
                if !graph.value(grad_node).is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite inner gradient for parameter {p} at step {step}"
                    )));
                }
                let delta = graph.mul(lr_node, grad_node);
                *slot = graph.sub(*slot, delta);
            }
        }
    }
    let end_values: Vec<f64> = phi.iter().map(|&id| graph.value(id)).collect();
    let end = ParameterVector::new(Arc::clone(theta.layout()), end_values)?;
    Ok(InnerTrace {
        graph,
        start: theta.clone(),
        end_ids: phi,
        end,
    })
}

/// Meta loss L(φ, X'ₜ) and its gradient with respect to the start
/// parameters θ. Second-order mode backpropagates through the recorded
/// trace; first-order mode evaluates the gradient at φ on a fresh graph,
/// treating dφ/dθ as the identity. With zero inner steps the two modes
/// agree exactly.
pub fn meta_gradient(
    trace: &mut InnerTrace,
    meta_loss: &dyn LossFn,
    mode: GradMode,
) -> Result<(f64, GradientVector)> {
    let layout = Arc::clone(trace.start.layout());
    let (value, grad_values) = match mode {
        GradMode::SecondOrder => {
            let node = meta_loss.emit(&mut trace.graph, &trace.end_ids)?;
            let value = trace.graph.value(node);
            (value, trace.graph.leaf_gradient(node)?)
        }
        GradMode::FirstOrder => {
            let mut g = Graph::with_leaves(trace.end.values());
            let ids = g.leaf_ids();
            let node = meta_loss.emit(&mut g, &ids)?;
            let value = g.value(node);
            (value, g.leaf_gradient(node)?)
        }
    };
    if !value.is_finite() {
        return Err(Error::Numeric("non-finite meta loss".into()));
    }
    Ok((value, GradientVector::new(layout, grad_values)?))
}

/// Convenience: the composed map θ ↦ L(Alg(θ), X'ₜ) as a plain value, used
/// by the finite-difference oracle.
pub fn composed_meta_loss(
    theta: &ParameterVector,
    task_loss: &dyn LossFn,
    lrs: &[LrStep],
    meta_loss: &dyn LossFn,
) -> Result<f64> {
    let mut trace = inner_update(theta, task_loss, lrs)?;
    let node = meta_loss.emit(&mut trace.graph, &trace.end_ids)?;
    Ok(trace.graph.value(node))
}

/// Cosine similarity between task and meta gradients over the full
/// flattened vectors; 0 when either norm is below 1e-12. Clamped to
/// [−1, 1].
pub fn task_similarity(task_grad: &GradientVector, meta_grad: &GradientVector) -> Result<f64> {
    task_grad.same_layout(meta_grad)?;
    let na = task_grad.norm();
    let nb = meta_grad.norm();
    if na < 1e-12 || nb < 1e-12 {
        return Ok(0.0);
    }
    let s = task_grad.dot(meta_grad)? / (na * nb);
    Ok(s.clamp(-1.0, 1.0))
}

/// Tempered-softmax weights over similarity scores; each in (0, 1) for
/// n ≥ 2 and summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityWeights {
    pub weights: Vec<f64>,
}

impl SimilarityWeights {
    pub fn uniform(n: usize) -> Self {
        SimilarityWeights {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Numerically stable softmax of `scores / tau` (max subtraction).
pub fn rescale_weights(scores: &[f64], tau: f64) -> Result<SimilarityWeights> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!("tau must be positive, got {tau}")));
    }
    if scores.is_empty() {
        return Err(Error::Config(
            "rescale_weights needs at least one score".into(),
        ));
    }
    let scaled: Vec<f64> = scores.iter().map(|s| s / tau).collect();
    let m = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(SimilarityWeights {
        weights: exps.iter().map(|e| e / z).collect(),
    })
}

/// Cosine annealing schedule over `horizon` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LRSchedule {
    pub eta0: f64,
    pub eta_min: f64,
    pub horizon: usize,
}

impl LRSchedule {
    pub fn new(eta0: f64, horizon: usize) -> Self {
        LRSchedule {
            eta0,
            eta_min: 0.0,
            horizon,
        }
    }
}

/// `eta_min + ½(eta0 − eta_min)(1 + cos(π t / horizon))`.
pub fn cosine_anneal(sched: &LRSchedule, t: usize) -> Result<f64> {
    if t > sched.horizon {
        return Err(Error::Config(format!(
            "schedule step {t} is past the horizon {}",
            sched.horizon
        )));
    }
    if sched.horizon == 0 {
        return Ok(sched.eta0);
    }
    let progress = t as f64 / sched.horizon as f64;
    Ok(sched.eta_min
        + 0.5 * (sched.eta0 - sched.eta_min) * (1.0 + (std::f64::consts::PI * progress).cos()))
}

/// Everything one source task contributes to an outer update.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    /// φᵢ − θ.
    pub task_grad: GradientVector,
    pub meta_loss: f64,
    /// dL(φᵢ, X'ₜ)/dθ.
    pub meta_grad: GradientVector,
    /// Cosine similarity sᵢ ∈ [−1, 1].
    pub similarity: f64,
}

/// Decoupled adaptive-moment optimizer state (β₁ = 0.9, β₂ = 0.999,
/// ε = 1e-8); weight decay is decoupled and scaled by the step size.
#[derive(Debug, Clone)]
pub struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl AdamW {
    pub fn new(n: usize) -> Self {
        AdamW {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// θ ← θ − lr·(m̂/(√v̂ + ε) + wd·θ).
    pub fn step(
        &mut self,
        params: &mut ParameterVector,
        grad: &[f64],
        lr: f64,
        weight_decay: f64,
    ) -> Result<()> {
        if grad.len() != params.len() || grad.len() != self.m.len() {
            return Err(Error::Structural(
                "optimizer, parameter and gradient sizes disagree".into(),
            ));
        }
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        let values = params.values_mut();
        for i in 0..grad.len() {
            let g = grad[i];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            values[i] -= lr * (m_hat / (v_hat.sqrt() + ADAM_EPS) + weight_decay * values[i]);
        }
        params.check_finite()
    }
}

/// Aggregate the weighted meta gradients in task order and apply one outer
/// optimizer step with step size `beta_t`.
pub fn outer_update(
    theta: &mut ParameterVector,
    outcomes: &[TaskOutcome],
    weights: &SimilarityWeights,
    beta_t: f64,
    weight_decay: f64,
    opt: &mut AdamW,
) -> Result<()> {
    if outcomes.len() != weights.len() {
        return Err(Error::Structural(format!(
            "{} task outcomes but {} weights",
            outcomes.len(),
            weights.len()
        )));
    }
    if outcomes.is_empty() {
        return Err(Error::Structural(
            "outer update needs at least one task".into(),
        ));
    }
    let n = theta.len();
    let mut aggregate = vec![0.0; n];
    for (outcome, &w) in outcomes.iter().zip(&weights.weights) {
        outcome.meta_grad.same_layout(&outcomes[0].meta_grad)?;
        for (a, g) in aggregate.iter_mut().zip(outcome.meta_grad.values()) {
            *a += w * g;
        }
    }
    if let Some(i) = aggregate.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite aggregated meta gradient at index {i}"
        )));
    }
    opt.step(theta, &aggregate, beta_t, weight_decay)
}

/// Result of a training run: the best-validation parameters and the
/// validation history.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub best: ParameterVector,
    pub best_iter: usize,
    pub best_ba: f64,
    pub history: Vec<ValidationPoint>,
}

fn with_iteration(err: Error, iter: usize) -> Error {
    match err {
        Error::Numeric(msg) => Error::Numeric(format!("iteration {iter}: {msg}")),
        other => other,
    }
}

struct BestTracker {
    best: Option<(f64, usize, ParameterVector)>,
}

impl BestTracker {
    fn new() -> Self {
        BestTracker { best: None }
    }

    /// Keep the highest balanced accuracy; ties keep the earlier iteration.
    fn offer(&mut self, ba: f64, iter: usize, params: &ParameterVector) {
        let better = match &self.best {
            None => true,
            Some((best_ba, _, _)) => ba > *best_ba,
        };
        if better {
            self.best = Some((ba, iter, params.clone()));
        }
    }
}

/// Run the configured variant for `cfg.n_iters` outer iterations and return
/// the parameters with the best validation balanced accuracy.
///
/// `observer` is called with `(iteration, θ)` after every outer update;
/// pass a no-op closure when the trajectory is not needed.
pub fn run_metaadapt_observed(
    source_train: &Featurized,
    meta: &MetaTask,
    valid: &Featurized,
    spec: &ModelSpec,
    cfg: &MetaConfig,
    mut observer: impl FnMut(usize, &ParameterVector),
) -> Result<RunOutput> {
    cfg.validate()?;
    spec.validate()?;
    if meta.examples.is_empty() {
        return Err(Error::Data(
            "meta task is empty; 0-shot runs train on the source alone".into(),
        ));
    }
    if !valid.iter().any(|(_, l)| *l == 0) || !valid.iter().any(|(_, l)| *l == 1) {
        return Err(Error::Data(
            "validation set must contain both classes".into(),
        ));
    }
    if cfg.variant != Variant::NaiveFinetune && source_train.len() < cfg.task_batch {
        return Err(Error::Data(format!(
            "source training set has {} examples, need at least {}",
            source_train.len(),
            cfg.task_batch
        )));
    }

    let mut theta = model::init_params(spec, cfg.inner_steps, cfg.alpha0, cfg.seed)?;
    let slots = ModelSlots::resolve(theta.layout())?;
    let lr_range = theta.layout().range(model::segments::INNER_LR)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = AdamW::new(theta.len());
    let alpha_sched = LRSchedule::new(cfg.alpha0, cfg.n_iters);
    let beta_sched = LRSchedule::new(cfg.beta0, cfg.n_iters);
    let mut tracker = BestTracker::new();
    let mut history = Vec::new();

    for t in 0..cfg.n_iters {
        let beta_t = cosine_anneal(&beta_sched, t)?;
        let step_result = if cfg.variant == Variant::NaiveFinetune {
            naive_step(&mut theta, meta, &slots, beta_t, cfg, &mut opt)
        } else {
            meta_step(
                &mut theta,
                source_train,
                meta,
                &slots,
                &lr_range,
                &alpha_sched,
                beta_t,
                t,
                cfg,
                &mut rng,
                &mut opt,
            )
        };
        step_result.map_err(|e| with_iteration(e, t))?;
        observer(t, &theta);

        if (t + 1) % cfg.validate_every == 0 {
            let metrics = evaluate_featurized(&theta, valid)?;
            history.push(ValidationPoint {
                iter: t + 1,
                metrics,
            });
            tracker.offer(metrics.ba, t + 1, &theta);
        }
    }

    let (best_ba, best_iter, best) = match tracker.best {
        Some(b) => b,
        // no validation point fell inside the run; fall back to the final θ
        None => {
            let metrics = evaluate_featurized(&theta, valid)?;
            (metrics.ba, cfg.n_iters, theta)
        }
    };
    Ok(RunOutput {
        best,
        best_iter,
        best_ba,
        history,
    })
}

/// [`run_metaadapt_observed`] without trajectory observation.
pub fn run_metaadapt(
    source_train: &Featurized,
    meta: &MetaTask,
    valid: &Featurized,
    spec: &ModelSpec,
    cfg: &MetaConfig,
) -> Result<RunOutput> {
    run_metaadapt_observed(source_train, meta, valid, spec, cfg, |_, _| {})
}

fn naive_step(
    theta: &mut ParameterVector,
    meta: &MetaTask,
    slots: &ModelSlots,
    beta_t: f64,
    cfg: &MetaConfig,
    opt: &mut AdamW,
) -> Result<()> {
    let mut graph = Graph::with_leaves(theta.values());
    let ids = graph.leaf_ids();
    let loss = model::emit_loss(&mut graph, &ids, slots, &meta.examples)?;
    if !graph.value(loss).is_finite() {
        return Err(Error::Numeric("non-finite supervised loss".into()));
    }
    let grad = graph.leaf_gradient(loss)?;
    opt.step(theta, &grad, beta_t, cfg.weight_decay)
}

#[allow(clippy::too_many_arguments)]
fn meta_step(
    theta: &mut ParameterVector,
    source_train: &Featurized,
    meta: &MetaTask,
    slots: &ModelSlots,
    lr_range: &std::ops::Range<usize>,
    alpha_sched: &LRSchedule,
    beta_t: f64,
    t: usize,
    cfg: &MetaConfig,
    rng: &mut ChaCha8Rng,
    opt: &mut AdamW,
) -> Result<()> {
    let lrs: Vec<LrStep> = if cfg.variant.adaptive_lr() {
        lr_range.clone().map(LrStep::Param).collect()
    } else {
        let alpha_t = cosine_anneal(alpha_sched, t)?;
        (0..cfg.inner_steps)
            .map(|_| LrStep::Value(alpha_t))
            .collect()
    };
    let mode = cfg.variant.gradient_mode();
    let meta_loss = BatchLoss {
        slots,
        batch: &meta.examples,
    };

    // every task starts from the same θ snapshot
    let mut outcomes = Vec::with_capacity(cfg.n_tasks);
    for _ in 0..cfg.n_tasks {
        let task = sample_source_task(source_train, cfg.task_batch, rng)?;
        let task_loss = BatchLoss {
            slots,
            batch: &task.batch,
        };
        let mut trace = inner_update(theta, &task_loss, &lrs)?;
        let (loss, grad) = meta_gradient(&mut trace, &meta_loss, mode)?;
        let task_grad = trace.task_displacement();
        // Score a task by how well its inner-loop movement agrees with the
        // outer descent direction −meta_grad: positive means the two loops
        // are converging the same way and the task is worth upweighting.
        let similarity = -task_similarity(&task_grad, &grad)?;
        outcomes.push(TaskOutcome {
            task_grad,
            meta_loss: loss,
            meta_grad: grad,
            similarity,
        });
    }

    let weights = if cfg.variant.uses_similarity_weights() {
        let scores: Vec<f64> = outcomes.iter().map(|o| o.similarity).collect();
        rescale_weights(&scores, cfg.tau)?
    } else {
        SimilarityWeights::uniform(cfg.n_tasks)
    };
    outer_update(theta, &outcomes, &weights, beta_t, cfg.weight_decay, opt)
}

/// Plain supervised training on sampled source batches: the 0-shot path
/// (train on the source, evaluate on the target directly). Uses the same
/// outer optimizer and annealed step size as the meta variants; model
/// selection runs on the *source* validation split since 0-shot has no
/// target labels at all.
pub fn run_source_supervised(
    source_train: &Featurized,
    valid: &Featurized,
    spec: &ModelSpec,
    cfg: &MetaConfig,
) -> Result<RunOutput> {
    cfg.validate()?;
    spec.validate()?;
    if source_train.len() < cfg.task_batch {
        return Err(Error::Data(format!(
            "source training set has {} examples, need at least {}",
            source_train.len(),
            cfg.task_batch
        )));
    }
    if valid.is_empty() {
        return Err(Error::Data("validation set is empty".into()));
    }
    let mut theta = model::init_params(spec, cfg.inner_steps, cfg.alpha0, cfg.seed)?;
    let slots = ModelSlots::resolve(theta.layout())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = AdamW::new(theta.len());
    let beta_sched = LRSchedule::new(cfg.beta0, cfg.n_iters);
    let mut tracker = BestTracker::new();
    let mut history = Vec::new();

    for t in 0..cfg.n_iters {
        let beta_t = cosine_anneal(&beta_sched, t)?;
        let batch = sample_source_task(source_train, cfg.task_batch, &mut rng)?;
        let mut graph = Graph::with_leaves(theta.values());
        let ids = graph.leaf_ids();
        let loss = model::emit_loss(&mut graph, &ids, &slots, &batch.batch)
            .map_err(|e| with_iteration(e, t))?;
        if !graph.value(loss).is_finite() {
            return Err(with_iteration(
                Error::Numeric("non-finite supervised loss".into()),
                t,
            ));
        }
        let grad = graph
            .leaf_gradient(loss)
            .map_err(|e| with_iteration(e, t))?;
        opt.step(&mut theta, &grad, beta_t, cfg.weight_decay)
            .map_err(|e| with_iteration(e, t))?;

        if (t + 1) % cfg.validate_every == 0 {
            let metrics = evaluate_featurized(&theta, valid)?;
            history.push(ValidationPoint {
                iter: t + 1,
                metrics,
            });
            tracker.offer(metrics.ba, t + 1, &theta);
        }
    }
    let (best_ba, best_iter, best) = match tracker.best {
        Some(b) => b,
        None => {
            let metrics = evaluate_featurized(&theta, valid)?;
            (metrics.ba, cfg.n_iters, theta)
        }
    };
    Ok(RunOutput {
        best,
        best_iter,
        best_ba,
        history,
    })
}
