//! Coarse-grained reverse-mode differentiation.
//!
//! The tape records whole-matrix primitives (products, sparse propagation,
//! activations, losses) with hand-derived backward rules. A node can only
//! reference nodes recorded before it, so the node order is a topological
//! order and the backward sweep is a single reverse pass.
//!
//! ```
//! use privgraph::numkit::{DenseMatrix, Tape};
//!
//! let mut tape = Tape::new();
//! let w = tape.param(DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
//! let total = tape.sum(w);
//! let grads = tape.backward(total).unwrap();
//! assert_eq!(grads.get(w).unwrap(), &DenseMatrix::filled(2, 2, 1.0));
//! ```

use std::sync::Arc;

use super::dense::{log_softmax_rows, matmul, matmul_nt, matmul_tn, relu, DenseMatrix};
use super::sparse::{spmm, SparseMatrix};
use super::{sigmoid, softplus};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Param,
    Constant,
    MatMul(Var, Var),
    SpMM(Arc<SparseMatrix>, Var),
    Relu(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    LogSoftmaxRows(Var),
    GatherRows(Var, Vec<usize>),
    RowDot(Var, Var),
    SoftmaxCe {
        logits: Var,
        labels: Vec<usize>,
        probs: DenseMatrix,
    },
    BceWithLogits {
        scores: Var,
        targets: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: DenseMatrix,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar output with respect to every parameter leaf.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<DenseMatrix>>,
}

impl Gradients {
    /// Gradient for a parameter leaf; `None` for non-parameter nodes.
    pub fn get(&self, v: Var) -> Option<&DenseMatrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Like [`Gradients::get`] but moves the matrix out.
    pub fn take(&mut self, v: Var) -> Option<DenseMatrix> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &DenseMatrix {
        &self.nodes[v.0].value
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> Result<f64> {
        let m = self.value(v);
        if m.shape() != (1, 1) {
            return Err(Error::Contract(format!("node {} is {:?}, not a scalar", v.0, m.shape())));
        }
        Ok(m.get(0, 0))
    }

    fn push(&mut self, value: DenseMatrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Trainable leaf; [`Tape::backward`] reports its gradient.
    pub fn param(&mut self, value: DenseMatrix) -> Var {
        self.push(value, Op::Param, true)
    }

    pub fn constant(&mut self, value: DenseMatrix) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = matmul(self.value(a), self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMul(a, b), ng))
    }

    /// `s · d` with `s` held constant.
    pub fn spmm(&mut self, s: &Arc<SparseMatrix>, d: Var) -> Result<Var> {
        let value = spmm(s, self.value(d))?;
        let ng = self.needs(d);
        Ok(self.push(value, Op::SpMM(Arc::clone(s), d), ng))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = relu(self.value(a));
        let ng = self.needs(a);
        self.push(value, Op::Relu(a), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Sub(a, b), ng))
    }

    pub fn scale(&mut self, a: Var, alpha: f64) -> Var {
        let value = self.value(a).scale(alpha);
        let ng = self.needs(a);
        self.push(value, Op::Scale(a, alpha), ng)
    }

    /// Sum of all entries, as a 1×1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = DenseMatrix::filled(1, 1, self.value(a).sum());
        let ng = self.needs(a);
        self.push(value, Op::Sum(a), ng)
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let value = log_softmax_rows(self.value(a));
        let ng = self.needs(a);
        self.push(value, Op::LogSoftmaxRows(a), ng)
    }

    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let value = self.value(a).gather_rows(indices)?;
        let ng = self.needs(a);
        Ok(self.push(value, Op::GatherRows(a, indices.to_vec()), ng))
    }

    /// Row-wise inner products: an `n×1` column with `out[k] = a[k,:]·b[k,:]`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        va.check_same(vb, "row_dot")?;
        let value = DenseMatrix::from_fn(va.rows(), 1, |r, _| {
            va.row(r).iter().zip(vb.row(r)).map(|(x, y)| x * y).sum()
        });
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::RowDot(a, b), ng))
    }

    /// Mean softmax cross-entropy of `logits` rows against `labels`.
    pub fn softmax_ce(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if labels.len() != lv.rows() {
            return Err(Error::shape("softmax_ce", lv.shape(), (labels.len(), 1)));
        }
        if lv.rows() == 0 {
            return Err(Error::Contract("softmax_ce over zero rows".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= lv.cols()) {
            return Err(Error::Index {
                what: "class label",
                index: bad,
                bound: lv.cols(),
            });
        }
        let logp = log_softmax_rows(lv);
        let n = labels.len() as f64;
        let total: f64 = labels.iter().enumerate().map(|(r, &y)| -logp.get(r, y)).sum();
        let probs = logp.map(f64::exp);
        let ng = self.needs(logits);
        Ok(self.push(
            DenseMatrix::filled(1, 1, total / n),
            Op::SoftmaxCe {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            ng,
        ))
    }

    /// Mean binary cross-entropy on raw scores, in the `softplus` form.
    pub fn bce_with_logits(&mut self, scores: Var, targets: &[f64]) -> Result<Var> {
        let sv = self.value(scores);
        if sv.data().len() != targets.len() {
            return Err(Error::shape("bce_with_logits", sv.shape(), (targets.len(), 1)));
        }
        if targets.is_empty() {
            return Err(Error::Contract("bce_with_logits over zero scores".into()));
        }
        let total: f64 = sv
            .data()
            .iter()
            .zip(targets)
            .map(|(&s, &t)| t * softplus(-s) + (1.0 - t) * softplus(s))
            .sum();
        let value = DenseMatrix::filled(1, 1, total / targets.len() as f64);
        let ng = self.needs(scores);
        Ok(self.push(
            value,
            Op::BceWithLogits {
                scores,
                targets: targets.to_vec(),
            },
            ng,
        ))
    }

    /// Reverse sweep from a scalar node. Fan-out contributions are summed.
    /// Every parameter leaf gets an entry, zero if it does not reach `output`.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = &self.nodes[output.0];
        if out.value.shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar output, node {} is {:?}",
                output.0,
                out.value.shape()
            )));
        }
        let mut acc: Vec<Option<DenseMatrix>> = vec![None; output.0 + 1];
        acc[output.0] = Some(DenseMatrix::filled(1, 1, 1.0));

        for id in (0..=output.0).rev() {
            let Some(g) = acc[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Param => {
                    acc[id] = Some(g);
                    continue;
                }
                Op::Constant => {}
                Op::MatMul(a, b) => {
                    if self.needs(*a) {
                        let ga = matmul_nt(&g, self.value(*b))?;
                        accumulate(&mut acc, *a, ga);
                    }
                    if self.needs(*b) {
                        let gb = matmul_tn(self.value(*a), &g)?;
                        accumulate(&mut acc, *b, gb);
                    }
                }
                Op::SpMM(s, d) => {
                    let gd = s.transpose_mul(&g)?;
                    accumulate(&mut acc, *d, gd);
                }
                Op::Relu(a) => {
                    let input = self.value(*a);
                    let mut ga = g;
                    for (gv, &x) in ga.data_mut().iter_mut().zip(input.data()) {
                        if x <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    accumulate(&mut acc, *a, ga);
                }
                Op::Add(a, b) => {
                    if self.needs(*b) {
                        accumulate(&mut acc, *b, g.clone());
                    }
                    if self.needs(*a) {
                        accumulate(&mut acc, *a, g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.needs(*b) {
                        accumulate(&mut acc, *b, g.scale(-1.0));
                    }
                    if self.needs(*a) {
                        accumulate(&mut acc, *a, g);
                    }
                }
                Op::Scale(a, alpha) => {
                    accumulate(&mut acc, *a, g.scale(*alpha));
                }
                Op::Sum(a) => {
                    let (r, c) = self.value(*a).shape();
                    accumulate(&mut acc, *a, DenseMatrix::filled(r, c, g.get(0, 0)));
                }
                Op::LogSoftmaxRows(a) => {
                    let out = &node.value;
                    let mut ga = g;
                    for r in 0..ga.rows() {
                        let gsum: f64 = ga.row(r).iter().sum();
                        let out_row = out.row(r);
                        for (gv, &lp) in ga.row_mut(r).iter_mut().zip(out_row) {
                            *gv -= lp.exp() * gsum;
                        }
                    }
                    accumulate(&mut acc, *a, ga);
                }
                Op::GatherRows(a, indices) => {
                    let (r, c) = self.value(*a).shape();
                    let mut ga = DenseMatrix::zeros(r, c);
                    for (k, &i) in indices.iter().enumerate() {
                        for (dst, &src) in ga.row_mut(i).iter_mut().zip(g.row(k)) {
                            *dst += src;
                        }
                    }
                    accumulate(&mut acc, *a, ga);
                }
                Op::RowDot(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    if self.needs(*b) {
                        let gb = DenseMatrix::from_fn(va.rows(), va.cols(), |r, c| g.get(r, 0) * va.get(r, c));
                        accumulate(&mut acc, *b, gb);
                    }
                    if self.needs(*a) {
                        let ga = DenseMatrix::from_fn(vb.rows(), vb.cols(), |r, c| g.get(r, 0) * vb.get(r, c));
                        accumulate(&mut acc, *a, ga);
                    }
                }
                Op::SoftmaxCe {
                    logits,
                    labels,
                    probs,
                } => {
                    let coef = g.get(0, 0) / labels.len() as f64;
                    let mut gl = probs.clone();
                    for (r, &y) in labels.iter().enumerate() {
                        let row = gl.row_mut(r);
                        row[y] -= 1.0;
                        for v in row.iter_mut() {
                            *v *= coef;
                        }
                    }
                    accumulate(&mut acc, *logits, gl);
                }
                Op::BceWithLogits { scores, targets } => {
                    let coef = g.get(0, 0) / targets.len() as f64;
                    let sv = self.value(*scores);
                    let mut gs = DenseMatrix::zeros(sv.rows(), sv.cols());
                    for ((gv, &s), &t) in gs.data_mut().iter_mut().zip(sv.data()).zip(targets) {
                        *gv = coef * (sigmoid(s) - t);
                    }
                    accumulate(&mut acc, *scores, gs);
                }
            }
        }

        let grads = (0..self.nodes.len())
            .map(|id| match self.nodes[id].op {
                Op::Param => Some(
                    acc.get_mut(id)
                        .and_then(Option::take)
                        .unwrap_or_else(|| {
                            let (r, c) = self.nodes[id].value.shape();
                            DenseMatrix::zeros(r, c)
                        }),
                ),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }
}

fn accumulate(acc: &mut [Option<DenseMatrix>], target: Var, g: DenseMatrix) {
    match &mut acc[target.0] {
        Some(existing) => {
            for (e, v) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += v;
            }
        }
        slot @ None => *slot = Some(g),
    }
}
