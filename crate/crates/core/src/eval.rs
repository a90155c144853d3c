//! Metrics: rank-based AUC, accuracy and random-guess baselines.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Test-set metrics of one run. Absent entries are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub auc: Option<f64>,
    pub accuracy: Option<f64>,
    pub rand_node: f64,
    pub rand_link: f64,
}

/// Mann–Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half. Average ranks, `O(n log n)`.
pub fn auc(scores_pos: &[f64], scores_neg: &[f64]) -> Result<f64> {
    if scores_pos.is_empty() || scores_neg.is_empty() {
        return Err(Error::Contract("AUC needs at least one positive and one negative score".into()));
    }
    if let Some(bad) = scores_pos.iter().chain(scores_neg).find(|v| v.is_nan()) {
        return Err(Error::Contract(format!("AUC over non-comparable score {bad}")));
    }
    let mut all: Vec<(f64, bool)> = scores_pos
        .iter()
        .map(|&s| (s, true))
        .chain(scores_neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));

    // Ranks are 1-based; a tie group spanning ranks i+1..=j gets (i+1+j)/2.
    // Doubled to stay in integers.
    let mut pos_rank_sum2: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let avg2 = (i + 1 + j) as u128;
        let npos = all[i..j].iter().filter(|e| e.1).count() as u128;
        pos_rank_sum2 += avg2 * npos;
        i = j;
    }
    let p = scores_pos.len() as u128;
    let n = scores_neg.len() as u128;
    // 2U = 2·R_pos − P(P+1)
    let u2 = pos_rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * n) as f64)
}

/// Fraction of positions where prediction equals truth.
pub fn accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} targets",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Contract("accuracy over an empty set".into()));
    }
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Random-guess levels: `1/C` accuracy for nodes, 0.5 AUC for links.
pub fn random_baselines(num_classes: usize) -> Result<(f64, f64)> {
    if num_classes < 2 {
        return Err(Error::Range(format!("need at least 2 classes, got {num_classes}")));
    }
    Ok((1.0 / num_classes as f64, 0.5))
}
