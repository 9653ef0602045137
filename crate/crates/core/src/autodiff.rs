//! Scalar-graph reverse-mode automatic differentiation.
//!
//! The graph is an append-only tape of scalar nodes with eager value
//! caching: building a node computes its value immediately. Two backward
//! passes are provided. [`Graph::adjoints`] accumulates plain `f64`
//! adjoints and is used when the derivatives themselves do not need to be
//! differentiated. [`Graph::backward_nodes`] emits the backward pass as
//! ordinary graph nodes, so the resulting derivative nodes can be
//! differentiated again — one more backward pass yields exact second-order
//! derivatives of the original scalar.
//!
//! Everything is `f64`; non-finite values fail fast with the offending
//! node identified.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::params::{GradientVector, ParameterVector};

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Leaf,
    Const,
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Neg(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    /// Ties resolve to the left operand.
    Max(NodeId, NodeId),
    Div(NodeId, NodeId),
}

impl Op {
    fn kind(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Const => "const",
            Op::Add(..) => "add",
            Op::Mul(..) => "mul",
            Op::Neg(..) => "neg",
            Op::Exp(..) => "exp",
            Op::Ln(..) => "ln",
            Op::Max(..) => "max",
            Op::Div(..) => "div",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    val: f64,
}

/// Append-only scalar computation graph. Leaves occupy ids `0..n_leaves`;
/// every node's operands precede it, so ascending id order is a topological
/// order.
#[derive(Debug, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
    n_leaves: usize,
}

impl Graph {
    /// A graph whose first nodes are leaf variables bound to `values`.
    pub fn with_leaves(values: &[f64]) -> Self {
        let mut nodes = Vec::with_capacity(values.len() * 2);
        for &v in values {
            nodes.push(Node {
                op: Op::Leaf,
                val: v,
            });
        }
        Graph {
            nodes,
            n_leaves: values.len(),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf_ids(&self) -> Vec<NodeId> {
        (0..self.n_leaves as NodeId).collect()
    }

    /// Cached value of a node (from construction or the latest evaluate).
    pub fn value(&self, id: NodeId) -> f64 {
        self.nodes[id as usize].val
    }

    #[inline]
    fn v(&self, id: NodeId) -> f64 {
        self.nodes[id as usize].val
    }

    #[inline]
    fn push(&mut self, op: Op, val: f64) -> NodeId {
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node { op, val });
        id
    }

    pub fn constant(&mut self, v: f64) -> NodeId {
        self.push(Op::Const, v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let val = self.v(a) + self.v(b);
        self.push(Op::Add(a, b), val)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let val = self.v(a) * self.v(b);
        self.push(Op::Mul(a, b), val)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let val = -self.v(a);
        self.push(Op::Neg(a), val)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let nb = self.neg(b);
        self.add(a, nb)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let val = self.v(a).exp();
        self.push(Op::Exp(a), val)
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let val = self.v(a).ln();
        self.push(Op::Ln(a), val)
    }

    pub fn max(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.v(a), self.v(b));
        let val = if va >= vb { va } else { vb };
        self.push(Op::Max(a, b), val)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let val = self.v(a) / self.v(b);
        self.push(Op::Div(a, b), val)
    }

    fn check_output(&self, output: NodeId) -> Result<()> {
        if (output as usize) >= self.nodes.len() {
            return Err(Error::Structural(format!(
                "node {output} is not in the graph ({} nodes)",
                self.nodes.len()
            )));
        }
        Ok(())
    }

    /// Rebind leaf values, recompute every cached node value in topological
    /// order, and return the output's value. Identical graph and leaves give
    /// bit-identical results.
    pub fn evaluate(&mut self, output: NodeId, leaves: &[f64]) -> Result<f64> {
        self.check_output(output)?;
        if leaves.len() != self.n_leaves {
            return Err(Error::Structural(format!(
                "graph has {} leaves but {} values were supplied",
                self.n_leaves,
                leaves.len()
            )));
        }
        for (node, &v) in self.nodes.iter_mut().zip(leaves) {
            node.val = v;
        }
        for i in 0..self.nodes.len() {
            let val = match self.nodes[i].op {
                Op::Leaf | Op::Const => self.nodes[i].val,
                Op::Add(a, b) => self.v(a) + self.v(b),
                Op::Mul(a, b) => self.v(a) * self.v(b),
                Op::Neg(a) => -self.v(a),
                Op::Exp(a) => self.v(a).exp(),
                Op::Ln(a) => self.v(a).ln(),
                Op::Max(a, b) => {
                    let (va, vb) = (self.v(a), self.v(b));
                    if va >= vb {
                        va
                    } else {
                        vb
                    }
                }
                Op::Div(a, b) => self.v(a) / self.v(b),
            };
            if !val.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite value at node {i} ({})",
                    self.nodes[i].op.kind()
                )));
            }
            self.nodes[i].val = val;
        }
        Ok(self.v(output))
    }

    /// Numeric reverse sweep from `output` over the cached values. Returns one
    /// adjoint per node id in `0..=output` (indexable by `NodeId`).
    pub fn adjoints(&self, output: NodeId) -> Result<Vec<f64>> {
        self.check_output(output)?;
        let n = output as usize + 1;
        let mut adj = vec![0.0; n];
        adj[output as usize] = 1.0;
        for i in (0..n).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            match self.nodes[i].op {
                Op::Leaf | Op::Const => {}
                Op::Add(a, b) => {
                    adj[a as usize] += g;
                    adj[b as usize] += g;
                }
                Op::Mul(a, b) => {
                    adj[a as usize] += g * self.v(b);
                    adj[b as usize] += g * self.v(a);
                }
                Op::Neg(a) => adj[a as usize] -= g,
                Op::Exp(a) => adj[a as usize] += g * self.nodes[i].val,
                Op::Ln(a) => adj[a as usize] += g / self.v(a),
                Op::Max(a, b) => {
                    if self.v(a) >= self.v(b) {
                        adj[a as usize] += g;
                    } else {
                        adj[b as usize] += g;
                    }
                }
                Op::Div(a, b) => {
                    let vb = self.v(b);
                    adj[a as usize] += g / vb;
                    adj[b as usize] -= g * self.nodes[i].val / vb;
                }
            }
        }
        Ok(adj)
    }

    /// Rebind leaves, evaluate, and return the derivative of the scalar
    /// `output` with respect to every leaf. When the graph's output was
    /// itself produced by [`Graph::backward_nodes`], the returned values are
    /// exact second-order derivatives of the original scalar.
    pub fn gradient(&mut self, output: NodeId, leaves: &[f64]) -> Result<Vec<f64>> {
        self.evaluate(output, leaves)?;
        let adj = self.adjoints(output)?;
        let grad: Vec<f64> = (0..self.n_leaves)
            .map(|i| adj.get(i).copied().unwrap_or(0.0))
            .collect();
        if let Some(i) = grad.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite derivative for leaf {i}"
            )));
        }
        Ok(grad)
    }

    /// Derivative of `output` with respect to every leaf over the cached
    /// values, without re-evaluating the forward pass.
    pub fn leaf_gradient(&self, output: NodeId) -> Result<Vec<f64>> {
        let adj = self.adjoints(output)?;
        let grad: Vec<f64> = (0..self.n_leaves)
            .map(|i| adj.get(i).copied().unwrap_or(0.0))
            .collect();
        if let Some(i) = grad.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite derivative for leaf {i}"
            )));
        }
        Ok(grad)
    }

    /// Emit the backward pass from `output` as graph nodes. Returns, for each
    /// node id in `0..=output`, the id of its adjoint node, or `None` when the
    /// adjoint is structurally zero. The emitted nodes reference the forward
    /// nodes, so they stay differentiable; `Max` branch choices are fixed at
    /// the recorded values.
    pub fn backward_nodes(&mut self, output: NodeId) -> Result<Vec<Option<NodeId>>> {
        self.check_output(output)?;
        let n = output as usize + 1;
        let mut adj: Vec<Option<NodeId>> = vec![None; n];
        let seed = self.constant(1.0);
        adj[output as usize] = Some(seed);
        for i in (0..n).rev() {
            let g = match adj[i] {
                Some(g) => g,
                None => continue,
            };
            match self.nodes[i].op {
                Op::Leaf | Op::Const => {}
                Op::Add(a, b) => {
                    self.accumulate(&mut adj, a, g);
                    self.accumulate(&mut adj, b, g);
                }
                Op::Mul(a, b) => {
                    let da = self.mul(g, b);
                    self.accumulate(&mut adj, a, da);
                    let db = self.mul(g, a);
                    self.accumulate(&mut adj, b, db);
                }
                Op::Neg(a) => {
                    let da = self.neg(g);
                    self.accumulate(&mut adj, a, da);
                }
                Op::Exp(a) => {
                    // d exp(a)/da = exp(a), which is node i itself.
                    let da = self.mul(g, i as NodeId);
                    self.accumulate(&mut adj, a, da);
                }
                Op::Ln(a) => {
                    let da = self.div(g, a);
                    self.accumulate(&mut adj, a, da);
                }
                Op::Max(a, b) => {
                    if self.v(a) >= self.v(b) {
                        self.accumulate(&mut adj, a, g);
                    } else {
                        self.accumulate(&mut adj, b, g);
                    }
                }
                Op::Div(a, b) => {
                    let da = self.div(g, b);
                    self.accumulate(&mut adj, a, da);
                    // d(a/b)/db = -(a/b)/b, reusing node i for a/b.
                    let q = self.div(i as NodeId, b);
                    let gq = self.mul(g, q);
                    let db = self.neg(gq);
                    self.accumulate(&mut adj, b, db);
                }
            }
        }
        Ok(adj)
    }

    fn accumulate(&mut self, adj: &mut [Option<NodeId>], target: NodeId, delta: NodeId) {
        adj[target as usize] = Some(match adj[target as usize] {
            None => delta,
            Some(existing) => self.add(existing, delta),
        });
    }
}

/// Record a graph-building procedure over the given parameters. The produced
/// graph's leaves are exactly the parameter entries, in layout order; only
/// the primitives exposed by [`Graph`] can appear, so unsupported operations
/// are unrepresentable.
pub fn record<F>(leaves: &ParameterVector, build: F) -> Result<(Graph, NodeId)>
where
    F: FnOnce(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    let mut graph = Graph::with_leaves(leaves.values());
    let ids = graph.leaf_ids();
    let output = build(&mut graph, &ids)?;
    graph.check_output(output)?;
    Ok((graph, output))
}

/// Central-difference gradient estimate over a raw slice:
/// `(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h` per coordinate.
pub fn finite_diff<F>(mut f: F, at: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(step > 0.0) {
        return Err(Error::Config(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let mut x = at.to_vec();
    let mut grad = Vec::with_capacity(at.len());
    for i in 0..at.len() {
        let orig = x[i];
        x[i] = orig + step;
        let plus = f(&x)?;
        x[i] = orig - step;
        let minus = f(&x)?;
        x[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite function value while probing coordinate {i}"
            )));
        }
        grad.push((plus - minus) / (2.0 * step));
    }
    Ok(grad)
}

/// [`finite_diff`] over a [`ParameterVector`], yielding a [`GradientVector`]
/// with the same layout. This is the independent oracle used to verify
/// backpropagated gradients.
pub fn finite_diff_gradient<F>(mut f: F, at: &ParameterVector, step: f64) -> Result<GradientVector>
where
    F: FnMut(&ParameterVector) -> Result<f64>,
{
    let layout = Arc::clone(at.layout());
    let probe_layout = Arc::clone(&layout);
    let values = finite_diff(
        |x| {
            let p = ParameterVector::new(Arc::clone(&probe_layout), x.to_vec())?;
            f(&p)
        },
        at.values(),
        step,
    )?;
    GradientVector::new(layout, values)
}

/// Relative error between a gradient and its reference, as
/// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂, 1e-10)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Layout;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pv(values: &[f64]) -> ParameterVector {
        let layout = Arc::new(Layout::new([("x", values.len())]));
        ParameterVector::new(layout, values.to_vec()).unwrap()
    }

    #[test]
    fn evaluate_square() {
        let (mut g, out) = record(&pv(&[3.0]), |g, ids| Ok(g.mul(ids[0], ids[0]))).unwrap();
        assert_eq!(g.evaluate(out, &[3.0]).unwrap(), 9.0);
    }

    #[test]
    fn evaluate_identity() {
        for c in [-2.5, 0.0, 7.0] {
            let (mut g, out) = record(&pv(&[c]), |_, ids| Ok(ids[0])).unwrap();
            assert_eq!(g.evaluate(out, &[c]).unwrap(), c);
        }
    }

    #[test]
    fn evaluate_rejects_layout_mismatch() {
        let (mut g, out) = record(&pv(&[1.0, 2.0]), |g, ids| Ok(g.add(ids[0], ids[1]))).unwrap();
        assert!(matches!(g.evaluate(out, &[1.0]), Err(Error::Structural(_))));
    }

    #[test]
    fn evaluate_names_non_finite_node() {
        let (mut g, out) = record(&pv(&[-1.0]), |g, ids| Ok(g.ln(ids[0]))).unwrap();
        let err = g.evaluate(out, &[-1.0]).unwrap_err();
        match err {
            Error::Numeric(msg) => assert!(msg.contains("node 1") && msg.contains("ln")),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn reevaluation_is_bit_identical() {
        let (mut g, out) = record(&pv(&[0.7, -1.3]), |g, ids| {
            let e = g.exp(ids[0]);
            let m = g.mul(e, ids[1]);
            let mx = g.constant(0.0);
            let r = g.max(m, mx);
            let r1 = g_add_one(g, r);
            Ok(g.ln(r1))
        })
        .unwrap();
        let a = g.evaluate(out, &[0.7, -1.3]).unwrap();
        let b = g.evaluate(out, &[0.7, -1.3]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    fn g_add_one(g: &mut Graph, a: NodeId) -> NodeId {
        let one = g.constant(1.0);
        g.add(a, one)
    }

    #[test]
    fn gradient_square() {
        let (mut g, out) = record(&pv(&[3.0]), |g, ids| Ok(g.mul(ids[0], ids[0]))).unwrap();
        let grad = g.gradient(out, &[3.0]).unwrap();
        assert!((grad[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_product() {
        let (mut g, out) = record(&pv(&[2.0, 5.0]), |g, ids| Ok(g.mul(ids[0], ids[1]))).unwrap();
        let grad = g.gradient(out, &[2.0, 5.0]).unwrap();
        assert_eq!(grad, vec![5.0, 2.0]);
    }

    /// d/dx(½x³) recorded as nodes, then differentiated again: the second
    /// derivative of ½x³ is 3x. Checked at x = 2 against both the symbolic
    /// value and central finite differences of the first-derivative function.
    #[test]
    fn grad_of_grad_cubic() {
        let x0 = 2.0;
        let first_derivative_at = |x: f64| -> f64 {
            let (mut g, out) = record(&pv(&[x]), |g, ids| {
                let half = g.constant(0.5);
                let x2 = g.mul(ids[0], ids[0]);
                let x3 = g.mul(x2, ids[0]);
                Ok(g.mul(half, x3))
            })
            .unwrap();
            g.gradient(out, &[x]).unwrap()[0]
        };

        let (mut g, out) = record(&pv(&[x0]), |g, ids| {
            let half = g.constant(0.5);
            let x2 = g.mul(ids[0], ids[0]);
            let x3 = g.mul(x2, ids[0]);
            Ok(g.mul(half, x3))
        })
        .unwrap();
        let adj = g.backward_nodes(out).unwrap();
        let dfdx = adj[0].expect("x must have an adjoint");
        assert!((g.value(dfdx) - 1.5 * x0 * x0).abs() < 1e-12);

        let second = g.gradient(dfdx, &[x0]).unwrap()[0];
        assert!((second - 3.0 * x0).abs() < 1e-10);

        let h = 1e-4;
        let fd = (first_derivative_at(x0 + h) - first_derivative_at(x0 - h)) / (2.0 * h);
        assert!((second - fd).abs() < 1e-6);
    }

    /// One and two recorded SGD steps on L(θ) = ½θ²: dφ/dθ is (1 − α)ⁿ.
    #[test]
    fn recorded_sgd_steps_differentiate() {
        let alpha = 0.1;
        let theta0 = 1.0;
        for steps in [0usize, 1, 2] {
            let (mut g, phi) = record(&pv(&[theta0]), |g, ids| {
                let a = g.constant(alpha);
                let mut phi = ids[0];
                for _ in 0..steps {
                    let half = g.constant(0.5);
                    let sq = g.mul(phi, phi);
                    let loss = g.mul(half, sq);
                    let adj = g.backward_nodes(loss)?;
                    let grad = adj[phi as usize].expect("phi participates in loss");
                    let step = g.mul(a, grad);
                    phi = g.sub(phi, step);
                }
                Ok(phi)
            })
            .unwrap();
            let expected_phi = theta0 * (1.0 - alpha).powi(steps as i32);
            assert!((g.value(phi) - expected_phi).abs() < 1e-12);

            let dphi = g.gradient(phi, &[theta0]).unwrap()[0];
            let expected = (1.0 - alpha).powi(steps as i32);
            assert!((dphi - expected).abs() < 1e-12, "steps={steps}");

            // finite-difference oracle on the unrolled map
            let unrolled = |t: f64| {
                let mut phi = t;
                for _ in 0..steps {
                    phi -= alpha * phi;
                }
                phi
            };
            let h = 1e-6;
            let fd = (unrolled(theta0 + h) - unrolled(theta0 - h)) / (2.0 * h);
            assert!((dphi - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn finite_diff_square() {
        let grad = finite_diff(|x| Ok(x[0] * x[0]), &[3.0], 1e-5).unwrap();
        assert!((grad[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn finite_diff_constant_is_zero() {
        let grad = finite_diff(|_| Ok(4.2), &[1.0, -2.0, 0.3], 1e-5).unwrap();
        assert!(grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn finite_diff_rejects_bad_step() {
        assert!(finite_diff(|x| Ok(x[0]), &[1.0], 0.0).is_err());
        assert!(finite_diff(|x| Ok(x[0]), &[1.0], -1e-5).is_err());
    }

    /// Every primitive's backpropagated derivative matches central finite
    /// differences on 100 random inputs in [−2, 2].
    #[test]
    fn primitives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-5;
        type Builder = fn(&mut Graph, &[NodeId]) -> NodeId;
        let cases: Vec<(&str, Builder, fn(&mut ChaCha8Rng) -> Vec<f64>)> = vec![
            ("add", |g, ids| g.add(ids[0], ids[1]), two_any),
            ("mul", |g, ids| g.mul(ids[0], ids[1]), two_any),
            ("neg", |g, ids| g.neg(ids[0]), one_any),
            ("exp", |g, ids| g.exp(ids[0]), one_any),
            ("ln", |g, ids| g.ln(ids[0]), one_positive),
            ("max", |g, ids| g.max(ids[0], ids[1]), two_apart),
            ("div", |g, ids| g.div(ids[0], ids[1]), two_nonzero_denom),
        ];
        for (name, build, draw) in cases {
            for _ in 0..100 {
                let x = draw(&mut rng);
                let (mut g, out) = record(&pv(&x), |g, ids| Ok(build(g, ids))).unwrap();
                let grad = g.gradient(out, &x).unwrap();
                let fd = finite_diff(
                    |v| {
                        let (mut g, out) = record(&pv(v), |g, ids| Ok(build(g, ids))).unwrap();
                        g.evaluate(out, v)
                    },
                    &x,
                    h,
                )
                .unwrap();
                let err = relative_error(&grad, &fd);
                assert!(err <= 1e-4, "{name} at {x:?}: rel err {err}");
            }
        }
    }

    fn one_any(rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![rng.random_range(-2.0..2.0)]
    }

    fn two_any(rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]
    }

    fn one_positive(rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![rng.random_range(0.1..2.0)]
    }

    /// Operands kept away from the max kink, where the finite-difference
    /// oracle itself is invalid.
    fn two_apart(rng: &mut ChaCha8Rng) -> Vec<f64> {
        loop {
            let a: f64 = rng.random_range(-2.0..2.0);
            let b: f64 = rng.random_range(-2.0..2.0);
            if (a - b).abs() > 1e-3 {
                return vec![a, b];
            }
        }
    }

    fn two_nonzero_denom(rng: &mut ChaCha8Rng) -> Vec<f64> {
        let a = rng.random_range(-2.0..2.0);
        loop {
            let b: f64 = rng.random_range(-2.0..2.0);
            if b.abs() > 0.1 {
                return vec![a, b];
            }
        }
    }

    /// Gradient is linear: grad(a·f + b·g) = a·grad(f) + b·grad(g).
    #[test]
    fn gradient_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a = rng.random_range(-3.0..3.0);
            let b = rng.random_range(-3.0..3.0);
            let x = vec![rng.random_range(-2.0..2.0), rng.random_range(0.5..2.0)];

            let build_f = |g: &mut Graph, ids: &[NodeId]| {
                let e = g.exp(ids[0]);
                g.mul(e, ids[1])
            };
            let build_g = |g: &mut Graph, ids: &[NodeId]| {
                let s = g.mul(ids[0], ids[0]);
                let l = g.ln(ids[1]);
                g.add(s, l)
            };

            let (mut gf, fo) = record(&pv(&x), |g, ids| Ok(build_f(g, ids))).unwrap();
            let grad_f = gf.gradient(fo, &x).unwrap();
            let (mut gg, go) = record(&pv(&x), |g, ids| Ok(build_g(g, ids))).unwrap();
            let grad_g = gg.gradient(go, &x).unwrap();

            let (mut gc, co) = record(&pv(&x), |g, ids| {
                let f = build_f(g, ids);
                let gg = build_g(g, ids);
                let ca = g.constant(a);
                let cb = g.constant(b);
                let af = g.mul(ca, f);
                let bg = g.mul(cb, gg);
                Ok(g.add(af, bg))
            })
            .unwrap();
            let grad_c = gc.gradient(co, &x).unwrap();

            for i in 0..x.len() {
                let expect = a * grad_f[i] + b * grad_g[i];
                assert!((grad_c[i] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            }
        }
    }

    /// Grad-of-grad on cubics matches the symbolic second derivative.
    #[test]
    fn second_derivative_of_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let (c3, c2, c1) = (
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let x0: f64 = rng.random_range(-2.0..2.0);
            let (mut g, out) = record(&pv(&[x0]), |g, ids| {
                let x = ids[0];
                let x2 = g.mul(x, x);
                let x3 = g.mul(x2, x);
                let k3 = g.constant(c3);
                let k2 = g.constant(c2);
                let k1 = g.constant(c1);
                let t3 = g.mul(k3, x3);
                let t2 = g.mul(k2, x2);
                let t1 = g.mul(k1, x);
                let s = g.add(t3, t2);
                Ok(g.add(s, t1))
            })
            .unwrap();
            let adj = g.backward_nodes(out).unwrap();
            let first = adj[0].unwrap();
            let second = g.gradient(first, &[x0]).unwrap()[0];
            let expect = 6.0 * c3 * x0 + 2.0 * c2;
            assert!((second - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn finite_diff_gradient_matches_on_parameter_vector() {
        let p = pv(&[0.4, -0.8, 1.1]);
        let f = |p: &ParameterVector| {
            let v = p.values();
            Ok(v[0] * v[1] + v[2] * v[2] * v[1])
        };
        let grad = finite_diff_gradient(f, &p, 1e-5).unwrap();
        let expect = [-0.8, 0.4 + 1.1 * 1.1, 2.0 * 1.1 * -0.8];
        for (a, b) in grad.values().iter().zip(expect) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}
