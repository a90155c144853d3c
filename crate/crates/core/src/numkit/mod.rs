//! Numerical substrate: matrices, reverse-mode differentiation, Adam, RNG.
//!
//! Everything is `f64` and single-threaded. Summation orders are fixed, so
//! identical inputs give bitwise-identical outputs.

mod adam;
mod dense;
mod rng;
mod sparse;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use dense::{log_softmax_rows, matmul, relu, DenseMatrix};
pub use rng::{derive_seed, seeded_uniform, Rng};
pub use sparse::{spmm, SparseMatrix};
pub use tape::{Gradients, Tape, Var};

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
