//! Loss terms and λ-weighted objectives.
//!
//! Both heads are trained on conditional log-likelihood: the primary head to
//! tighten a variational lower bound on the mutual information it needs, the
//! adversary head to tighten the conditional term of a vCLUB upper bound on the
//! information to be hidden. The encoder then minimizes
//! `λ·L_primary − (1−λ)·L_privacy` where both losses are mean cross-entropies.
//!
//! The vCLUB estimators at the bottom are monitoring diagnostics: the mean
//! log-likelihood of the true targets minus that of a random re-pairing of the
//! targets (a sample from the product of marginals).

use crate::error::{Error, Result};
use crate::graphdata::Pair;
use crate::models::{classify_logits, link_scores, link_scores_on, ClassifierParams, PredictorParams};
use crate::numkit::{log_softmax_rows, softplus, DenseMatrix, Rng, Tape, Var};

/// Loss values of one evaluation of a λ-weighted objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub primary_loss: f64,
    pub privacy_loss: f64,
    pub combined: f64,
    pub lambda: f64,
}

impl LossReport {
    pub fn new(primary_loss: f64, privacy_loss: f64, lambda: f64) -> Result<Self> {
        Ok(Self {
            primary_loss,
            privacy_loss,
            combined: encoder_objective(primary_loss, privacy_loss, lambda)?,
            lambda,
        })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Range(format!("trade-off factor must lie in [0, 1], got {lambda}")));
    }
    Ok(())
}

fn encoder_objective(primary: f64, privacy: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(lambda * primary - (1.0 - lambda) * privacy)
}

/// Link prediction protected against node-label inference:
/// `λ·L_link − (1−λ)·L_node`.
pub fn problem1_encoder_objective(l_link: f64, l_node: f64, lambda: f64) -> Result<f64> {
    encoder_objective(l_link, l_node, lambda)
}

/// Node classification protected against link inference:
/// `λ·L_node − (1−λ)·L_link`.
pub fn problem2_encoder_objective(l_node: f64, l_link: f64, lambda: f64) -> Result<f64> {
    encoder_objective(l_node, l_link, lambda)
}

/// `λ·primary − (1−λ)·privacy` on the tape. A term whose weight is exactly
/// zero is left out, so at λ = 1 the gradient is exactly that of `primary`.
pub fn encoder_objective_on(tape: &mut Tape, primary: Var, privacy: Var, lambda: f64) -> Result<Var> {
    check_lambda(lambda)?;
    let keep = 1.0 - lambda;
    if keep == 0.0 {
        return Ok(tape.scale(primary, lambda));
    }
    if lambda == 0.0 {
        return Ok(tape.scale(privacy, -keep));
    }
    let a = tape.scale(primary, lambda);
    let b = tape.scale(privacy, keep);
    tape.sub(a, b)
}

/// Pairs with targets, sorted by pair so the reduction order does not depend
/// on how the caller ordered them.
fn sorted_pairs(pairs: &[Pair], targets: &[f64]) -> Result<(Vec<Pair>, Vec<f64>)> {
    if pairs.is_empty() {
        return Err(Error::Contract("link loss over an empty pair set".into()));
    }
    if pairs.len() != targets.len() {
        return Err(Error::Contract(format!(
            "{} pairs but {} targets",
            pairs.len(),
            targets.len()
        )));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| {
        pairs[a]
            .cmp(&pairs[b])
            .then(targets[a].total_cmp(&targets[b]))
    });
    Ok((
        order.iter().map(|&i| pairs[i]).collect(),
        order.iter().map(|&i| targets[i]).collect(),
    ))
}

fn sorted_nodes(nodes: &[usize], labels: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    if nodes.is_empty() {
        return Err(Error::Contract("node loss over an empty node set".into()));
    }
    let mut nodes = nodes.to_vec();
    nodes.sort_unstable();
    let mut ys = Vec::with_capacity(nodes.len());
    for &v in &nodes {
        let y = *labels.get(v).ok_or(Error::Index {
            what: "labelled node",
            index: v,
            bound: labels.len(),
        })?;
        ys.push(y);
    }
    Ok((nodes, ys))
}

/// Mean binary cross-entropy of the bilinear scores over `pairs`.
/// Differentiable with respect to both `wb` and `z`.
pub fn link_ce_loss(tape: &mut Tape, wb: Var, z: Var, pairs: &[Pair], targets: &[f64]) -> Result<Var> {
    let (pairs, targets) = sorted_pairs(pairs, targets)?;
    let n = tape.value(z).rows();
    if let Some(&(u, v)) = pairs.iter().find(|&&(u, v)| u.max(v) >= n) {
        return Err(Error::Index {
            what: "link endpoint",
            index: u.max(v),
            bound: n,
        });
    }
    let scores = link_scores_on(tape, wb, z, &pairs)?;
    tape.bce_with_logits(scores, &targets)
}

/// Mean softmax cross-entropy of the classifier over the labelled `nodes`.
/// `labels` is indexed by node id.
pub fn node_ce_loss(tape: &mut Tape, wc: Var, z: Var, nodes: &[usize], labels: &[usize]) -> Result<Var> {
    let (nodes, ys) = sorted_nodes(nodes, labels)?;
    let zs = tape.gather_rows(z, &nodes)?;
    let logits = tape.matmul(zs, wc)?;
    tape.softmax_ce(logits, &ys)
}

/// Mean log q_ψ(y_{perm[i]} | z_{nodes[i]}).
fn node_log_likelihood(logp: &DenseMatrix, ys: &[usize], perm: &[usize]) -> f64 {
    let total: f64 = perm.iter().enumerate().map(|(i, &j)| logp.get(i, ys[j])).sum();
    total / ys.len() as f64
}

/// vCLUB estimate for labels given an explicit re-pairing `perm` of the
/// (sorted) node set. The identity permutation yields exactly zero.
pub fn vclub_node_estimate_with(
    psi: &ClassifierParams,
    z: &DenseMatrix,
    nodes: &[usize],
    labels: &[usize],
    perm: &[usize],
) -> Result<f64> {
    let (nodes, ys) = sorted_nodes(nodes, labels)?;
    if perm.len() != nodes.len() {
        return Err(Error::Contract("permutation length differs from node set".into()));
    }
    let logp = log_softmax_rows(&classify_logits(psi, &z.gather_rows(&nodes)?)?);
    let identity: Vec<usize> = (0..nodes.len()).collect();
    let joint = node_log_likelihood(&logp, &ys, &identity);
    let marginal = node_log_likelihood(&logp, &ys, perm);
    Ok(joint - marginal)
}

/// vCLUB estimate `E_p(z,y)[log q(y|z)] − E_p(z)p(y)[log q(y|z)]` with the
/// marginal term drawn from one random label permutation.
pub fn vclub_node_estimate(
    psi: &ClassifierParams,
    z: &DenseMatrix,
    nodes: &[usize],
    labels: &[usize],
    rng: &mut Rng,
) -> Result<f64> {
    let perm = rng.permutation(nodes.len());
    vclub_node_estimate_with(psi, z, nodes, labels, &perm)
}

fn bernoulli_log_likelihood(score: f64, target: f64) -> f64 {
    -(target * softplus(-score) + (1.0 - target) * softplus(score))
}

/// Link analogue of [`vclub_node_estimate_with`].
pub fn vclub_link_estimate_with(
    phi: &PredictorParams,
    z: &DenseMatrix,
    pairs: &[Pair],
    targets: &[f64],
    perm: &[usize],
) -> Result<f64> {
    let (pairs, targets) = sorted_pairs(pairs, targets)?;
    if perm.len() != pairs.len() {
        return Err(Error::Contract("permutation length differs from pair set".into()));
    }
    let scores = link_scores(phi, z, &pairs)?;
    let n = scores.len() as f64;
    let joint: f64 = scores
        .iter()
        .zip(&targets)
        .map(|(&s, &t)| bernoulli_log_likelihood(s, t))
        .sum::<f64>()
        / n;
    let marginal: f64 = scores
        .iter()
        .zip(perm)
        .map(|(&s, &j)| bernoulli_log_likelihood(s, targets[j]))
        .sum::<f64>()
        / n;
    Ok(joint - marginal)
}

/// vCLUB estimate for link status, permuting targets across pairs.
pub fn vclub_link_estimate(
    phi: &PredictorParams,
    z: &DenseMatrix,
    pairs: &[Pair],
    targets: &[f64],
    rng: &mut Rng,
) -> Result<f64> {
    let perm = rng.permutation(pairs.len());
    vclub_link_estimate_with(phi, z, pairs, targets, &perm)
}
