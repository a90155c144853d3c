//! Graph representation learning with adversarial privacy protection.
//!
//! A two-layer graph-convolutional encoder produces node representations
//! that feed two heads: a bilinear link predictor and a softmax node
//! classifier. One task is the primary task; the other is treated as an
//! attack. The encoder is trained to serve the primary head while pushing
//! the attacking head toward random guessing, in an alternating min-max game
//! whose conditional log-likelihood terms are surrogates of variational
//! mutual-information bounds.
//!
//! Module map:
//! - [`numkit`]: dense/sparse matrices, a coarse-grained reverse-mode tape,
//!   Adam, seeded RNG.
//! - [`graphdata`]: attributed graphs, normalized adjacency, splits, SBM
//!   generator, text file formats.
//! - [`models`]: encoder, classifier and link-predictor parameters.
//! - [`objectives`]: loss terms, λ-weighted encoder objectives, vCLUB
//!   diagnostics.
//! - [`trainer`]: the alternating training loops and baselines.
//! - [`eval`]: AUC, accuracy, random-guess baselines.

pub mod error;
pub mod eval;
pub mod graphdata;
pub mod models;
pub mod numkit;
pub mod objectives;
pub mod trainer;

pub use error::{Error, Result};
