//! Encoder `f_θ`, node classifier `g_ψ` and bilinear link predictor `h_φ`.
//!
//! The encoder is a two-layer graph convolution without biases:
//!
//! ```text
//! Z = Â · relu(Â · X · W0) · W1
//! ```
//!
//! One shared `Z` feeds both heads. The classifier produces logits `Z · Wc`;
//! the link predictor scores a pair as `z_uᵀ · Wb · z_v` and its probability
//! is the sigmoid of that score.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numkit::{matmul, relu, spmm, DenseMatrix, Rng, SparseMatrix, Tape, Var};

/// Layer sizes: input features, hidden width, embedding width, classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub input: usize,
    pub hidden: usize,
    pub embed: usize,
    pub classes: usize,
}

impl Dims {
    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.hidden == 0 || self.embed == 0 || self.classes == 0 {
            return Err(Error::Range(format!("all dimensions must be >= 1, got {self:?}")));
        }
        Ok(())
    }
}

/// θ.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub w0: DenseMatrix,
    pub w1: DenseMatrix,
}

/// ψ.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub wc: DenseMatrix,
}

/// φ.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams {
    pub wb: DenseMatrix,
}

impl EncoderParams {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            w0: DenseMatrix::zeros(dims.input, dims.hidden),
            w1: DenseMatrix::zeros(dims.hidden, dims.embed),
        }
    }
}

impl ClassifierParams {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            wc: DenseMatrix::zeros(dims.embed, dims.classes),
        }
    }
}

impl PredictorParams {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            wb: DenseMatrix::zeros(dims.embed, dims.embed),
        }
    }
}

/// Glorot-uniform matrix: entries in `[-a, a]`, `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut Rng) -> DenseMatrix {
    let a = glorot_bound(fan_in, fan_out);
    DenseMatrix::from_fn(fan_in, fan_out, |_, _| rng.uniform_in(-a, a))
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Draws θ, φ, ψ in that order (W0, W1, Wb, Wc).
pub fn init_params(dims: Dims, rng: &mut Rng) -> Result<(EncoderParams, PredictorParams, ClassifierParams)> {
    dims.validate()?;
    let w0 = glorot_uniform(dims.input, dims.hidden, rng);
    let w1 = glorot_uniform(dims.hidden, dims.embed, rng);
    let wb = glorot_uniform(dims.embed, dims.embed, rng);
    let wc = glorot_uniform(dims.embed, dims.classes, rng);
    Ok((EncoderParams { w0, w1 }, PredictorParams { wb }, ClassifierParams { wc }))
}

/// Fixed inputs to the encoder. Features are kept in sparse form because
/// bag-of-words features are mostly zeros.
#[derive(Debug, Clone)]
pub struct GraphInput {
    pub adjacency: Arc<SparseMatrix>,
    pub features: Arc<SparseMatrix>,
}

impl GraphInput {
    pub fn new(adjacency: SparseMatrix, features: &DenseMatrix) -> Result<Self> {
        if adjacency.rows() != adjacency.cols() || adjacency.rows() != features.rows() {
            return Err(Error::shape("graph input", adjacency.shape(), features.shape()));
        }
        Ok(Self {
            adjacency: Arc::new(adjacency),
            features: Arc::new(SparseMatrix::from_dense(features)),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }
}

fn check_encoder(theta: &EncoderParams, input: &GraphInput) -> Result<()> {
    if input.features.cols() != theta.w0.rows() {
        return Err(Error::shape("encode", input.features.shape(), theta.w0.shape()));
    }
    if theta.w0.cols() != theta.w1.rows() {
        return Err(Error::shape("encode", theta.w0.shape(), theta.w1.shape()));
    }
    Ok(())
}

/// Plain forward pass `Z = Â · relu(Â · X · W0) · W1`.
pub fn encode(theta: &EncoderParams, input: &GraphInput) -> Result<DenseMatrix> {
    check_encoder(theta, input)?;
    let xw = spmm(&input.features, &theta.w0)?;
    let h = relu(&spmm(&input.adjacency, &xw)?);
    spmm(&input.adjacency, &matmul(&h, &theta.w1)?)
}

/// Encoder recorded on a tape, given the tape variables for W0 and W1.
pub fn encode_on(tape: &mut Tape, w0: Var, w1: Var, input: &GraphInput) -> Result<Var> {
    if input.features.cols() != tape.value(w0).rows() {
        return Err(Error::shape("encode", input.features.shape(), tape.value(w0).shape()));
    }
    let xw = tape.spmm(&input.features, w0)?;
    let ax = tape.spmm(&input.adjacency, xw)?;
    let h = tape.relu(ax);
    let hw = tape.matmul(h, w1)?;
    tape.spmm(&input.adjacency, hw)
}

/// Logits `Z · Wc`.
pub fn classify_logits(psi: &ClassifierParams, z: &DenseMatrix) -> Result<DenseMatrix> {
    if z.cols() != psi.wc.rows() {
        return Err(Error::shape("classify_logits", z.shape(), psi.wc.shape()));
    }
    matmul(z, &psi.wc)
}

/// Arg max of a logits row; ties go to the lowest column.
pub fn predict_label(logits: &DenseMatrix, u: usize) -> usize {
    let row = logits.row(u);
    let mut best = 0;
    for (c, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = c;
        }
    }
    best
}

/// Raw bilinear score `z_uᵀ · Wb · z_v`.
pub fn link_score(phi: &PredictorParams, z: &DenseMatrix, u: usize, v: usize) -> f64 {
    let (zu, zv) = (z.row(u), z.row(v));
    let d = zu.len();
    let mut total = 0.0;
    for (i, &a) in zu.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let wrow = &phi.wb.data()[i * d..(i + 1) * d];
        let inner: f64 = wrow.iter().zip(zv).map(|(w, b)| w * b).sum();
        total += a * inner;
    }
    total
}

/// Scores of many pairs, in order.
pub fn link_scores(phi: &PredictorParams, z: &DenseMatrix, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    if z.cols() != phi.wb.rows() {
        return Err(Error::shape("link_score", z.shape(), phi.wb.shape()));
    }
    for &(u, v) in pairs {
        let bad = u.max(v);
        if bad >= z.rows() {
            return Err(Error::Index {
                what: "link endpoint",
                index: bad,
                bound: z.rows(),
            });
        }
    }
    Ok(pairs.iter().map(|&(u, v)| link_score(phi, z, u, v)).collect())
}

/// Pair scores on a tape: an `n×1` column of `z_uᵀ · Wb · z_v`.
pub fn link_scores_on(tape: &mut Tape, wb: Var, z: Var, pairs: &[(usize, usize)]) -> Result<Var> {
    let us: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let vs: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let zu = tape.gather_rows(z, &us)?;
    let zv = tape.gather_rows(z, &vs)?;
    let zuw = tape.matmul(zu, wb)?;
    tape.row_dot(zuw, zv)
}

/// Link decision: 1 iff `sigmoid(score) > 0.5`, i.e. iff `score > 0`.
pub fn predict_link(score: f64) -> u8 {
    u8::from(score > 0.0)
}
