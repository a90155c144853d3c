//! Synthetic scenarios for the vCLUB diagnostics: labels independent of the
//! representations, and representations that encode the labels exactly.

#![allow(dead_code)]

use privgraph::graphdata::Pair;
use privgraph::models::{ClassifierParams, PredictorParams};
use privgraph::numkit::{AdamConfig, AdamState, DenseMatrix, Rng};
use privgraph::objectives::{vclub_link_estimate, vclub_node_estimate};
use privgraph::trainer::{fit_link_head, fit_node_head};

pub const SHUFFLES: usize = 10;
const FIT_STEPS: usize = 200;
const FIT_LR: f64 = 0.05;

fn fit_classifier(z: &DenseMatrix, labels: &[usize], classes: usize) -> ClassifierParams {
    let nodes: Vec<usize> = (0..z.rows()).collect();
    let mut psi = ClassifierParams {
        wc: DenseMatrix::zeros(z.cols(), classes),
    };
    let mut adam = AdamState::new(AdamConfig::with_lr(FIT_LR), &[&psi.wc]);
    fit_node_head(z, &mut psi, &mut adam, &nodes, labels, FIT_STEPS).expect("finite fit");
    psi
}

fn fit_predictor(z: &DenseMatrix, pairs: &[Pair], targets: &[f64]) -> PredictorParams {
    let mut phi = PredictorParams {
        wb: DenseMatrix::zeros(z.cols(), z.cols()),
    };
    let mut adam = AdamState::new(AdamConfig::with_lr(FIT_LR), &[&phi.wb]);
    fit_link_head(z, &mut phi, &mut adam, pairs, targets, FIT_STEPS).expect("finite fit");
    phi
}

/// Per-shuffle node estimates with N=2000, d=4, C=3 and labels drawn
/// independently of Z.
pub fn independent_node_estimates(seed: u64) -> Vec<f64> {
    let (n, d, c) = (2000, 4, 3);
    let mut rng = Rng::new(seed);
    let z = DenseMatrix::from_fn(n, d, |_, _| rng.uniform_in(-1.0, 1.0));
    let labels: Vec<usize> = (0..n).map(|_| rng.index(c)).collect();
    let psi = fit_classifier(&z, &labels, c);
    let nodes: Vec<usize> = (0..n).collect();
    (0..SHUFFLES)
        .map(|_| vclub_node_estimate(&psi, &z, &nodes, &labels, &mut rng).expect("valid inputs"))
        .collect()
}

/// Per-shuffle node estimates with Z the one-hot encoding of the label.
pub fn encoded_node_estimates(seed: u64) -> Vec<f64> {
    let (n, c) = (600, 3);
    let mut rng = Rng::new(seed);
    let labels: Vec<usize> = (0..n).map(|_| rng.index(c)).collect();
    let z = DenseMatrix::from_fn(n, c, |i, j| if labels[i] == j { 1.0 } else { 0.0 });
    let psi = fit_classifier(&z, &labels, c);
    let nodes: Vec<usize> = (0..n).collect();
    (0..SHUFFLES)
        .map(|_| vclub_node_estimate(&psi, &z, &nodes, &labels, &mut rng).expect("valid inputs"))
        .collect()
}

fn random_pairs(rng: &mut Rng, n: usize, count: usize) -> Vec<Pair> {
    (0..count)
        .map(|_| {
            let u = rng.index(n);
            let v = (u + 1 + rng.index(n - 1)) % n;
            (u.min(v), u.max(v))
        })
        .collect()
}

/// Link estimates with coin-flip targets independent of Z.
pub fn independent_link_estimates(seed: u64) -> Vec<f64> {
    let (n, d) = (500, 4);
    let mut rng = Rng::new(seed);
    let z = DenseMatrix::from_fn(n, d, |_, _| rng.uniform_in(-1.0, 1.0));
    let pairs = random_pairs(&mut rng, n, 2000);
    let targets: Vec<f64> = pairs.iter().map(|_| if rng.bernoulli(0.5) { 1.0 } else { 0.0 }).collect();
    let phi = fit_predictor(&z, &pairs, &targets);
    (0..SHUFFLES)
        .map(|_| vclub_link_estimate(&phi, &z, &pairs, &targets, &mut rng).expect("valid inputs"))
        .collect()
}

/// Link estimates where a pair is linked iff both ends share a group and Z
/// is the ±1 group indicator.
pub fn encoded_link_estimates(seed: u64) -> Vec<f64> {
    let n = 400;
    let mut rng = Rng::new(seed);
    let group: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.5)).collect();
    let z = DenseMatrix::from_fn(n, 1, |i, _| if group[i] { 1.0 } else { -1.0 });
    let pairs = random_pairs(&mut rng, n, 2000);
    let targets: Vec<f64> = pairs
        .iter()
        .map(|&(u, v)| if group[u] == group[v] { 1.0 } else { 0.0 })
        .collect();
    let phi = fit_predictor(&z, &pairs, &targets);
    (0..SHUFFLES)
        .map(|_| vclub_link_estimate(&phi, &z, &pairs, &targets, &mut rng).expect("valid inputs"))
        .collect()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
