//! The detector f(θ, x): hashed bag-of-n-grams features feeding a small MLP
//! with a softplus hidden layer and softmax cross-entropy loss.
//!
//! Features use the hashing trick with FNV-1a 64-bit so the encoding is
//! bit-exact across implementations. The loss is emitted as a scalar graph
//! (see [`crate::autodiff`]) so it can be differentiated through repeatedly.

use std::ops::Range;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::params::{Layout, ParameterVector};

/// Model architecture parameters. Serialized inside the run-config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub hash_dim: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
    pub ngram_orders: Vec<usize>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            hash_dim: 2048,
            hidden_dim: 32,
            n_classes: 2,
            ngram_orders: vec![1, 2],
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hash_dim < self.n_classes {
            return Err(Error::Config(format!(
                "hash_dim ({}) must be at least n_classes ({})",
                self.hash_dim, self.n_classes
            )));
        }
        if self.hidden_dim < 1 {
            return Err(Error::Config("hidden_dim must be at least 1".into()));
        }
        if self.n_classes != 2 {
            return Err(Error::Config(
                "only binary classification (n_classes = 2) is supported".into(),
            ));
        }
        if self.ngram_orders.is_empty() || self.ngram_orders.iter().any(|&n| n == 0) {
            return Err(Error::Config(
                "ngram_orders must be a non-empty list of positive orders".into(),
            ));
        }
        if self.hash_dim > u32::MAX as usize {
            return Err(Error::Config("hash_dim too large".into()));
        }
        Ok(())
    }

    /// Number of trainable values, including the learnable inner-LR segment.
    pub fn n_params(&self, inner_steps: usize) -> usize {
        self.hidden_dim * self.hash_dim
            + self.hidden_dim
            + self.n_classes * self.hidden_dim
            + self.n_classes
            + inner_steps
    }
}

/// Sparse L2-normalized token-count features over the hash dimension.
/// Entries are sorted by index, so equal text gives an identical vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nonzero coordinates as (index, value), sorted by index.
    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a 64-bit hash, the canonical feature hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hash word n-grams of the configured orders into `hash_dim` buckets,
/// count, and L2-normalize. Empty text gives the zero vector. The text is
/// expected to be preprocessed already (see [`crate::data::preprocess`]).
pub fn featurize(text: &str, spec: &ModelSpec) -> FeatureVector {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut counts: std::collections::HashMap<u32, u64> = std::collections::HashMap::new();
    for &order in &spec.ngram_orders {
        if order == 0 || tokens.len() < order {
            continue;
        }
        for window in tokens.windows(order) {
            let gram = window.join(" ");
            let idx = (fnv1a64(gram.as_bytes()) % spec.hash_dim as u64) as u32;
            *counts.entry(idx).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(u32, f64)> = counts.into_iter().map(|(i, c)| (i, c as f64)).collect();
    entries.sort_unstable_by_key(|(i, _)| *i);
    let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, v) in entries.iter_mut() {
            *v /= norm;
        }
    }
    FeatureVector {
        dim: spec.hash_dim,
        entries,
    }
}

/// Class probabilities plus the argmax label (ties go to the lower index).
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub label: u8,
}

/// Segment names used by the model layout.
pub mod segments {
    pub const W1: &str = "w1";
    pub const B1: &str = "b1";
    pub const W2: &str = "w2";
    pub const B2: &str = "b2";
    pub const INNER_LR: &str = "inner_lr";
}

/// Build the named-segment layout for a model with `inner_steps` learnable
/// per-step inner learning rates.
pub fn layout(spec: &ModelSpec, inner_steps: usize) -> Layout {
    Layout::new([
        (segments::W1, spec.hidden_dim * spec.hash_dim),
        (segments::B1, spec.hidden_dim),
        (segments::W2, spec.n_classes * spec.hidden_dim),
        (segments::B2, spec.n_classes),
        (segments::INNER_LR, inner_steps),
    ])
}

/// Resolved index ranges of the model segments within a layout.
#[derive(Debug, Clone)]
pub struct ModelSlots {
    pub w1: Range<usize>,
    pub b1: Range<usize>,
    pub w2: Range<usize>,
    pub b2: Range<usize>,
    pub inner_lr: Range<usize>,
}

impl ModelSlots {
    pub fn resolve(layout: &Layout) -> Result<Self> {
        let slots = ModelSlots {
            w1: layout.range(segments::W1)?,
            b1: layout.range(segments::B1)?,
            w2: layout.range(segments::W2)?,
            b2: layout.range(segments::B2)?,
            inner_lr: layout.range(segments::INNER_LR)?,
        };
        let hidden = slots.b1.len();
        if hidden == 0 || slots.w1.len() % hidden != 0 {
            return Err(Error::Structural(
                "w1 segment size is not a multiple of the hidden dimension".into(),
            ));
        }
        if slots.b2.is_empty() || slots.w2.len() != slots.b2.len() * hidden {
            return Err(Error::Structural(
                "w2 segment does not match hidden and class dimensions".into(),
            ));
        }
        Ok(slots)
    }

    pub fn hidden_dim(&self) -> usize {
        self.b1.len()
    }

    pub fn n_classes(&self) -> usize {
        self.b2.len()
    }

    pub fn hash_dim(&self) -> usize {
        self.w1.len() / self.hidden_dim()
    }
}

/// Initialize parameters: weights uniform in ±1/√fan_in from a seeded
/// generator, biases zero, and every learnable inner LR set to `alpha0`.
pub fn init_params(
    spec: &ModelSpec,
    inner_steps: usize,
    alpha0: f64,
    seed: u64,
) -> Result<ParameterVector> {
    spec.validate()?;
    let layout = Arc::new(layout(spec, inner_steps));
    let mut values = vec![0.0; layout.total_len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let w1 = layout.range(segments::W1)?;
    let bound1 = 1.0 / (spec.hash_dim as f64).sqrt();
    for v in &mut values[w1] {
        *v = rng.random_range(-bound1..bound1);
    }
    let w2 = layout.range(segments::W2)?;
    let bound2 = 1.0 / (spec.hidden_dim as f64).sqrt();
    for v in &mut values[w2] {
        *v = rng.random_range(-bound2..bound2);
    }
    let lr = layout.range(segments::INNER_LR)?;
    for v in &mut values[lr] {
        *v = alpha0;
    }
    ParameterVector::new(layout, values)
}

/// Numerically stable softplus, written with the same operation sequence as
/// the graph emission in [`emit_loss`]: max(x,0) + ln(1 + exp(x − 2·max(x,0))).
fn softplus(x: f64) -> f64 {
    let m = if x >= 0.0 { x } else { 0.0 };
    m + (1.0 + (x - 2.0 * m).exp()).ln()
}

fn logits_f64(params: &ParameterVector, slots: &ModelSlots, features: &FeatureVector) -> Vec<f64> {
    let hidden = slots.hidden_dim();
    let hash_dim = slots.hash_dim();
    let v = params.values();
    let mut h = vec![0.0; hidden];
    for j in 0..hidden {
        let mut acc = v[slots.b1.start + j];
        let row = slots.w1.start + j * hash_dim;
        for &(d, x) in features.entries() {
            acc += v[row + d as usize] * x;
        }
        h[j] = softplus(acc);
    }
    let mut logits = vec![0.0; slots.n_classes()];
    for (c, logit) in logits.iter_mut().enumerate() {
        let mut acc = v[slots.b2.start + c];
        let row = slots.w2.start + c * hidden;
        for (j, &hj) in h.iter().enumerate() {
            acc += v[row + j] * hj;
        }
        *logit = acc;
    }
    logits
}

/// Softmax probabilities and argmax label for one input.
pub fn predict(params: &ParameterVector, features: &FeatureVector) -> Result<Prediction> {
    let slots = ModelSlots::resolve(params.layout())?;
    if features.dim() != slots.hash_dim() {
        return Err(Error::Structural(format!(
            "feature dimension {} does not match model hash dimension {}",
            features.dim(),
            slots.hash_dim()
        )));
    }
    let logits = logits_f64(params, &slots, features);
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|e| e / z).collect();
    let mut label = 0usize;
    for (c, &p) in probs.iter().enumerate() {
        if p > probs[label] {
            label = c;
        }
    }
    Ok(Prediction {
        probs,
        label: label as u8,
    })
}

/// Emit the mean softmax cross-entropy of a batch as graph nodes over the
/// given parameter nodes (`ids` indexed per the layout behind `slots`).
/// Returns the scalar loss node.
pub fn emit_loss(
    g: &mut Graph,
    ids: &[NodeId],
    slots: &ModelSlots,
    batch: &[(FeatureVector, u8)],
) -> Result<NodeId> {
    if batch.is_empty() {
        return Err(Error::Structural("loss requires a non-empty batch".into()));
    }
    let hidden = slots.hidden_dim();
    let n_classes = slots.n_classes();
    let hash_dim = slots.hash_dim();
    let zero = g.constant(0.0);
    let one = g.constant(1.0);
    let minus_two = g.constant(-2.0);

    let mut total: Option<NodeId> = None;
    for (features, label) in batch {
        if features.dim() != hash_dim {
            return Err(Error::Structural(format!(
                "feature dimension {} does not match model hash dimension {hash_dim}",
                features.dim()
            )));
        }
        if (*label as usize) >= n_classes {
            return Err(Error::Structural(format!(
                "label {label} out of range for {n_classes} classes"
            )));
        }
        // hidden pre-activations over the sparse input
        let mut hvals = Vec::with_capacity(hidden);
        for j in 0..hidden {
            let mut acc = ids[slots.b1.start + j];
            let row = slots.w1.start + j * hash_dim;
            for &(d, x) in features.entries() {
                let xc = g.constant(x);
                let term = g.mul(ids[row + d as usize], xc);
                acc = g.add(acc, term);
            }
            // softplus(x) = max(x,0) + ln(1 + exp(x - 2·max(x,0)))
            let m = g.max(acc, zero);
            let mm = g.mul(minus_two, m);
            let t = g.add(acc, mm);
            let e = g.exp(t);
            let oe = g.add(one, e);
            let l = g.ln(oe);
            hvals.push(g.add(m, l));
        }
        // class logits
        let mut logits = Vec::with_capacity(n_classes);
        for c in 0..n_classes {
            let mut acc = ids[slots.b2.start + c];
            let row = slots.w2.start + c * hidden;
            for (j, &hj) in hvals.iter().enumerate() {
                let term = g.mul(ids[row + j], hj);
                acc = g.add(acc, term);
            }
            logits.push(acc);
        }
        // cross-entropy via log-sum-exp with max subtraction
        let mut m = logits[0];
        for &l in &logits[1..] {
            m = g.max(m, l);
        }
        let mut z: Option<NodeId> = None;
        for &l in &logits {
            let d = g.sub(l, m);
            let e = g.exp(d);
            z = Some(match z {
                None => e,
                Some(acc) => g.add(acc, e),
            });
        }
        let lnz = g.ln(z.expect("at least one class"));
        let lse = g.add(m, lnz);
        let nll = g.sub(lse, logits[*label as usize]);
        total = Some(match total {
            None => nll,
            Some(acc) => g.add(acc, nll),
        });
    }
    let inv = g.constant(1.0 / batch.len() as f64);
    Ok(g.mul(inv, total.expect("non-empty batch")))
}

/// Mean cross-entropy of `params` on `batch` as a fresh graph whose leaves
/// are the parameter entries. Returns the graph and the loss node.
pub fn loss_graph(
    params: &ParameterVector,
    batch: &[(FeatureVector, u8)],
) -> Result<(Graph, NodeId)> {
    let slots = ModelSlots::resolve(params.layout())?;
    crate::autodiff::record(params, |g, ids| emit_loss(g, ids, &slots, batch))
}
