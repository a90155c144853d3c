//! Alternating training of the encoder and the two heads.
//!
//! Protected runs follow the same round structure for both problems. In every
//! inner step the forward pass is recorded once and, from that single point:
//!
//! - the primary head descends its own cross-entropy (`lr1`),
//! - the adversary head descends its own cross-entropy (`lr2`), i.e. it fits
//!   the protected targets as well as it can,
//! - the encoder descends `λ·L_primary − (1−λ)·L_privacy` (`lr3`), which
//!   ascends the adversary's loss.
//!
//! Baselines train the encoder with the primary head only, then fit the
//! attack head post hoc on the frozen representations.
//!
//! Every round ends with a validation pass; the round with the best
//! validation primary metric is kept as the selected model.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::{accuracy, auc};
use crate::graphdata::{normalized_adjacency_from_edges, Graph, LinkSplit, NodeSplit, Pair};
use crate::models::{
    classify_logits, encode, encode_on, init_params, link_scores, predict_label, ClassifierParams, Dims,
    EncoderParams, GraphInput, PredictorParams,
};
use crate::numkit::{derive_seed, AdamConfig, AdamState, DenseMatrix, Rng, Tape};
use crate::objectives::{encoder_objective_on, link_ce_loss, node_ce_loss, vclub_link_estimate, vclub_node_estimate};

/// Stream tags for parameter initialization and the vCLUB permutations.
pub const INIT_STREAM: u64 = 3;
pub const DIAGNOSTIC_STREAM: u64 = 4;

/// Which run to perform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    /// Link prediction with node-label protection.
    Problem1,
    /// Node classification with link protection.
    Problem2,
    /// Unprotected link prediction, node-label attack fit afterwards.
    BaselineLink,
    /// Unprotected node classification, link attack fit afterwards.
    BaselineNode,
}

/// The two prediction tasks on a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Link,
    Node,
}

impl Task {
    pub fn primary(self) -> Head {
        match self {
            Task::Problem1 | Task::BaselineLink => Head::Link,
            Task::Problem2 | Task::BaselineNode => Head::Node,
        }
    }

    pub fn privacy(self) -> Head {
        match self.primary() {
            Head::Link => Head::Node,
            Head::Node => Head::Link,
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, Task::BaselineLink | Task::BaselineNode)
    }

    /// 1 for link-primary tasks, 2 for node-primary tasks.
    pub fn problem(self) -> u8 {
        match self.primary() {
            Head::Link => 1,
            Head::Node => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Problem1 => "problem1",
            Task::Problem2 => "problem2",
            Task::BaselineLink => "baseline-link",
            Task::BaselineNode => "baseline-node",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "problem1" => Ok(Task::Problem1),
            "problem2" => Ok(Task::Problem2),
            "baseline-link" => Ok(Task::BaselineLink),
            "baseline-node" => Ok(Task::BaselineNode),
            other => Err(Error::Range(format!(
                "unknown task {other:?} (problem1, problem2, baseline-link, baseline-node)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda: f64,
    /// Primary head step size.
    pub lr1: f64,
    /// Adversary (attack) head step size.
    pub lr2: f64,
    /// Encoder step size.
    pub lr3: f64,
    pub inner_steps: usize,
    pub rounds: usize,
    pub dims: Dims,
    pub seed: u64,
    pub task: Task,
}

impl TrainConfig {
    /// Defaults for a graph with `input` features and `classes` labels:
    /// λ = 0.5, all step sizes 0.01, one inner step, 200 rounds, hidden 64,
    /// embedding 16.
    pub fn new(task: Task, input: usize, classes: usize) -> Self {
        Self {
            lambda: 0.5,
            lr1: 0.01,
            lr2: 0.01,
            lr3: 0.01,
            inner_steps: 1,
            rounds: 200,
            dims: Dims {
                input,
                hidden: 64,
                embed: 16,
                classes,
            },
            seed: 0,
            task,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Range(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        for (name, lr) in [("lr1", self.lr1), ("lr2", self.lr2), ("lr3", self.lr3)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Range(format!("{name} must be a positive step size, got {lr}")));
            }
        }
        if self.inner_steps == 0 || self.rounds == 0 {
            return Err(Error::Range("inner_steps and rounds must be >= 1".into()));
        }
        self.dims.validate()
    }

    fn check_task(&self, allowed: &[Task]) -> Result<()> {
        if !allowed.contains(&self.task) {
            return Err(Error::Contract(format!(
                "config task {} cannot be run by this trainer (expects {allowed:?})",
                self.task
            )));
        }
        Ok(())
    }
}

/// θ, φ, ψ and their optimizer states.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub encoder: EncoderParams,
    pub predictor: PredictorParams,
    pub classifier: ClassifierParams,
    pub adam_encoder: AdamState,
    pub adam_predictor: AdamState,
    pub adam_classifier: AdamState,
}

impl ModelState {
    /// Wraps parameters with fresh optimizer states. The head that serves the
    /// primary task gets `lr1`, the attacking head `lr2`, the encoder `lr3`.
    pub fn new(
        encoder: EncoderParams,
        predictor: PredictorParams,
        classifier: ClassifierParams,
        cfg: &TrainConfig,
    ) -> Result<Self> {
        let dims = cfg.dims;
        let expect = [
            (encoder.w0.shape(), (dims.input, dims.hidden)),
            (encoder.w1.shape(), (dims.hidden, dims.embed)),
            (predictor.wb.shape(), (dims.embed, dims.embed)),
            (classifier.wc.shape(), (dims.embed, dims.classes)),
        ];
        for (got, want) in expect {
            if got != want {
                return Err(Error::shape("model state", got, want));
            }
        }
        let (lr_pred, lr_cls) = match cfg.task.primary() {
            Head::Link => (cfg.lr1, cfg.lr2),
            Head::Node => (cfg.lr2, cfg.lr1),
        };
        Ok(Self {
            adam_encoder: AdamState::new(AdamConfig::with_lr(cfg.lr3), &[&encoder.w0, &encoder.w1]),
            adam_predictor: AdamState::new(AdamConfig::with_lr(lr_pred), &[&predictor.wb]),
            adam_classifier: AdamState::new(AdamConfig::with_lr(lr_cls), &[&classifier.wc]),
            encoder,
            predictor,
            classifier,
        })
    }

    /// Glorot initialization from the init sub-seed of `cfg.seed`.
    pub fn init(cfg: &TrainConfig) -> Result<Self> {
        let mut rng = Rng::new(derive_seed(cfg.seed, INIT_STREAM));
        let (theta, phi, psi) = init_params(cfg.dims, &mut rng)?;
        Self::new(theta, phi, psi, cfg)
    }

    /// All-zero parameters.
    pub fn zeros(cfg: &TrainConfig) -> Result<Self> {
        Self::new(
            EncoderParams::zeros(cfg.dims),
            PredictorParams::zeros(cfg.dims),
            ClassifierParams::zeros(cfg.dims),
            cfg,
        )
    }
}

/// Graph, splits and the derived training inputs of one run.
///
/// The encoder propagates over the training positives only: validation and
/// test positive edges are removed from the adjacency for every task.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub input: GraphInput,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub nodes: NodeSplit,
    pub links: LinkSplit,
    train_pairs: (Vec<Pair>, Vec<f64>),
}

impl TaskData {
    pub fn new(graph: &Graph, nodes: NodeSplit, links: LinkSplit) -> Result<Self> {
        if nodes.train.is_empty() {
            return Err(Error::Contract("node split has no training nodes".into()));
        }
        if links.train_pos.is_empty() {
            return Err(Error::Contract("link split has no training positives".into()));
        }
        let adjacency = normalized_adjacency_from_edges(graph.num_nodes(), &links.train_pos);
        Ok(Self {
            input: GraphInput::new(adjacency, graph.features())?,
            labels: graph.labels().to_vec(),
            num_classes: graph.num_classes(),
            train_pairs: links.train_pairs(),
            nodes,
            links,
        })
    }

    pub fn train_pairs(&self) -> (&[Pair], &[f64]) {
        (&self.train_pairs.0, &self.train_pairs.1)
    }

    fn node_metric(&self, state: &ModelState, z: &DenseMatrix, nodes: &[usize]) -> Result<f64> {
        let logits = classify_logits(&state.classifier, &z.gather_rows(nodes)?)?;
        let pred: Vec<usize> = (0..nodes.len()).map(|i| predict_label(&logits, i)).collect();
        let truth: Vec<usize> = nodes.iter().map(|&v| self.labels[v]).collect();
        accuracy(&pred, &truth)
    }

    fn link_metric(&self, state: &ModelState, z: &DenseMatrix, pos: &[Pair], neg: &[Pair]) -> Result<f64> {
        let sp = link_scores(&state.predictor, z, pos)?;
        let sn = link_scores(&state.predictor, z, neg)?;
        auc(&sp, &sn)
    }

    /// `(link AUC, node accuracy)` on one partition.
    pub fn metrics(&self, state: &ModelState, part: Partition) -> Result<(f64, f64)> {
        let z = encode(&state.encoder, &self.input)?;
        self.metrics_with(state, &z, part)
    }

    fn metrics_with(&self, state: &ModelState, z: &DenseMatrix, part: Partition) -> Result<(f64, f64)> {
        let (nodes, pos, neg) = match part {
            Partition::Train => (&self.nodes.train, &self.links.train_pos, &self.links.train_neg),
            Partition::Val => (&self.nodes.val, &self.links.val_pos, &self.links.val_neg),
            Partition::Test => (&self.nodes.test, &self.links.test_pos, &self.links.test_neg),
        };
        Ok((self.link_metric(state, z, pos, neg)?, self.node_metric(state, z, nodes)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    Train,
    Val,
    Test,
}

/// One row of the training trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    /// Primary-task training loss at the start of the round.
    pub primary_loss: f64,
    /// Privacy-task (adversary) training loss at the start of the round.
    pub privacy_loss: f64,
    pub val_primary: f64,
    pub val_privacy: f64,
    pub vclub: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<RoundRecord>,
    /// Baselines only: the attack head's training loss per post-hoc round.
    pub attack_losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// The model to evaluate: the selected round, plus the post-hoc attack
    /// head for baselines.
    pub state: ModelState,
    /// Parameters after the last round.
    pub final_state: ModelState,
    pub selected_round: usize,
    pub trace: TrainTrace,
}

/// Test-set metrics of a trained model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    pub link_auc: f64,
    pub node_accuracy: f64,
}

impl RunMetrics {
    pub fn primary(&self, task: Task) -> f64 {
        match task.primary() {
            Head::Link => self.link_auc,
            Head::Node => self.node_accuracy,
        }
    }

    pub fn privacy(&self, task: Task) -> f64 {
        match task.privacy() {
            Head::Link => self.link_auc,
            Head::Node => self.node_accuracy,
        }
    }
}

pub fn evaluate(state: &ModelState, data: &TaskData) -> Result<RunMetrics> {
    let (link_auc, node_accuracy) = data.metrics(state, Partition::Test)?;
    Ok(RunMetrics {
        link_auc,
        node_accuracy,
    })
}

/// Round with the lowest validation primary error (`1 − metric`); the earliest
/// round wins ties.
pub fn select_model(trace: &TrainTrace) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in trace.records.iter().enumerate() {
        let err = 1.0 - r.val_primary;
        if best.is_none_or(|(_, b)| err < b) {
            best = Some((i, err));
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::Contract("cannot select from an empty trace".into()))
}

/// Primary and privacy losses after one inner step.
#[derive(Debug, Clone, Copy)]
struct StepLosses {
    primary: f64,
    privacy: f64,
}

/// One joint update. `protect` selects between the λ-weighted encoder
/// objective (protected) and plain primary descent without touching the
/// attack head (baseline phase 1).
fn joint_step(state: &mut ModelState, data: &TaskData, cfg: &TrainConfig, protect: bool, round: usize) -> Result<StepLosses> {
    let primary_head = cfg.task.primary();
    let mut tape = Tape::new();
    let w0 = tape.param(state.encoder.w0.clone());
    let w1 = tape.param(state.encoder.w1.clone());
    let wb = tape.param(state.predictor.wb.clone());
    let wc = tape.param(state.classifier.wc.clone());
    let z = encode_on(&mut tape, w0, w1, &data.input)?;
    let (pairs, targets) = data.train_pairs();
    let l_link = link_ce_loss(&mut tape, wb, z, pairs, targets)?;
    let l_node = node_ce_loss(&mut tape, wc, z, &data.nodes.train, &data.labels)?;
    let (primary, privacy) = match primary_head {
        Head::Link => (l_link, l_node),
        Head::Node => (l_node, l_link),
    };
    let losses = StepLosses {
        primary: tape.scalar(primary)?,
        privacy: tape.scalar(privacy)?,
    };
    if !losses.primary.is_finite() {
        return Err(Error::Divergence { round, what: "primary loss" });
    }
    if !losses.privacy.is_finite() {
        return Err(Error::Divergence { round, what: "privacy loss" });
    }

    let mut g_primary = tape.backward(primary)?;
    let (g_encoder, g_adversary) = if protect {
        let mut g_privacy = tape.backward(privacy)?;
        let objective = encoder_objective_on(&mut tape, primary, privacy, cfg.lambda)?;
        let mut g_obj = tape.backward(objective)?;
        let adv = match primary_head {
            Head::Link => g_privacy.take(wc),
            Head::Node => g_privacy.take(wb),
        };
        ((g_obj.take(w0), g_obj.take(w1)), adv)
    } else {
        ((g_primary.take(w0), g_primary.take(w1)), None)
    };
    let (Some(gw0), Some(gw1)) = g_encoder else {
        unreachable!("encoder weights are tape parameters")
    };

    match primary_head {
        Head::Link => {
            let gb = g_primary.take(wb).expect("predictor is a tape parameter");
            state.adam_predictor.step(&mut [&mut state.predictor.wb], &[&gb], false)?;
            if let Some(gc) = g_adversary {
                state.adam_classifier.step(&mut [&mut state.classifier.wc], &[&gc], false)?;
            }
        }
        Head::Node => {
            let gc = g_primary.take(wc).expect("classifier is a tape parameter");
            state.adam_classifier.step(&mut [&mut state.classifier.wc], &[&gc], false)?;
            if let Some(gb) = g_adversary {
                state.adam_predictor.step(&mut [&mut state.predictor.wb], &[&gb], false)?;
            }
        }
    }
    let EncoderParams { w0: p0, w1: p1 } = &mut state.encoder;
    state.adam_encoder.step(&mut [p0, p1], &[&gw0, &gw1], false)?;
    Ok(losses)
}

fn diagnostics(state: &ModelState, data: &TaskData, cfg: &TrainConfig, rng: &mut Rng) -> Result<(f64, f64, f64)> {
    let z = encode(&state.encoder, &data.input)?;
    let (link_val, node_val) = data.metrics_with(state, &z, Partition::Val)?;
    let (val_primary, val_privacy, vclub) = match cfg.task.primary() {
        Head::Link => (
            link_val,
            node_val,
            vclub_node_estimate(&state.classifier, &z, &data.nodes.train, &data.labels, rng)?,
        ),
        Head::Node => {
            let (pairs, targets) = data.train_pairs();
            (node_val, link_val, vclub_link_estimate(&state.predictor, &z, pairs, targets, rng)?)
        }
    };
    Ok((val_primary, val_privacy, vclub))
}

/// Shared round loop: `rounds × inner_steps` joint updates with a validation
/// pass after each round and online selection of the best round.
fn run_rounds(
    mut state: ModelState,
    data: &TaskData,
    cfg: &TrainConfig,
    protect: bool,
) -> Result<(ModelState, ModelState, usize, TrainTrace)> {
    let mut diag_rng = Rng::new(derive_seed(cfg.seed, DIAGNOSTIC_STREAM));
    let mut trace = TrainTrace::default();
    let mut best: Option<(usize, f64, ModelState)> = None;
    for round in 0..cfg.rounds {
        let mut first = None;
        for _ in 0..cfg.inner_steps {
            let losses = joint_step(&mut state, data, cfg, protect, round)?;
            first.get_or_insert(losses);
        }
        let losses = first.expect("inner_steps >= 1");
        let (val_primary, val_privacy, vclub) = diagnostics(&state, data, cfg, &mut diag_rng)?;
        trace.records.push(RoundRecord {
            primary_loss: losses.primary,
            privacy_loss: losses.privacy,
            val_primary,
            val_privacy,
            vclub,
        });
        let err = 1.0 - val_primary;
        if best.as_ref().is_none_or(|(_, b, _)| err < *b) {
            best = Some((round, err, state.clone()));
        }
    }
    let (selected_round, _, selected) = best.expect("rounds >= 1");
    Ok((state, selected, selected_round, trace))
}


/// Link prediction with node-label protection.
pub fn train_problem1(graph: &Graph, nodes: &NodeSplit, links: &LinkSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.check_task(&[Task::Problem1])?;
    train_task(graph, nodes, links, cfg)
}

/// Node classification with link protection.
pub fn train_problem2(graph: &Graph, nodes: &NodeSplit, links: &LinkSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.check_task(&[Task::Problem2])?;
    train_task(graph, nodes, links, cfg)
}

/// Unprotected training followed by a post-hoc attack head.
pub fn train_baseline(graph: &Graph, nodes: &NodeSplit, links: &LinkSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.check_task(&[Task::BaselineLink, Task::BaselineNode])?;
    train_task(graph, nodes, links, cfg)
}

/// Dispatches on `cfg.task`, initializing from `cfg.seed`.
pub fn train_task(graph: &Graph, nodes: &NodeSplit, links: &LinkSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_dims(graph, cfg)?;
    let data = TaskData::new(graph, nodes.clone(), links.clone())?;
    train_from(ModelState::init(cfg)?, &data, cfg)
}

fn check_dims(graph: &Graph, cfg: &TrainConfig) -> Result<()> {
    if graph.feature_dim() != cfg.dims.input || graph.num_classes() != cfg.dims.classes {
        return Err(Error::Contract(format!(
            "config dims {:?} do not match graph (D={}, C={})",
            cfg.dims,
            graph.feature_dim(),
            graph.num_classes()
        )));
    }
    Ok(())
}

/// Runs `cfg.task` from an explicit initial state.
pub fn train_from(state: ModelState, data: &TaskData, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.task.is_baseline() {
        let (final_state, mut selected, selected_round, mut trace) = run_rounds(state, data, cfg, false)?;
        trace.attack_losses = train_attack_head(&mut selected, data, cfg)?;
        Ok(TrainOutcome {
            state: selected,
            final_state,
            selected_round,
            trace,
        })
    } else {
        let (final_state, selected, selected_round, trace) = run_rounds(state, data, cfg, true)?;
        Ok(TrainOutcome {
            state: selected,
            final_state,
            selected_round,
            trace,
        })
    }
}

/// Fits the attack head of `cfg.task` on frozen representations for
/// `rounds × inner_steps` steps. The encoder is only read.
pub fn train_attack_head(state: &mut ModelState, data: &TaskData, cfg: &TrainConfig) -> Result<Vec<f64>> {
    let z = encode(&state.encoder, &data.input)?;
    let steps = cfg.rounds * cfg.inner_steps;
    match cfg.task.privacy() {
        Head::Node => fit_node_head(
            &z,
            &mut state.classifier,
            &mut state.adam_classifier,
            &data.nodes.train,
            &data.labels,
            steps,
        ),
        Head::Link => {
            let (pairs, targets) = data.train_pairs();
            fit_link_head(&z, &mut state.predictor, &mut state.adam_predictor, pairs, targets, steps)
        }
    }
}

/// Cross-entropy descent of a classifier on fixed representations. Returns
/// the loss before each step.
pub fn fit_node_head(
    z: &DenseMatrix,
    psi: &mut ClassifierParams,
    adam: &mut AdamState,
    nodes: &[usize],
    labels: &[usize],
    steps: usize,
) -> Result<Vec<f64>> {
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let mut tape = Tape::new();
        let zv = tape.constant(z.clone());
        let wc = tape.param(psi.wc.clone());
        let loss = node_ce_loss(&mut tape, wc, zv, nodes, labels)?;
        let value = tape.scalar(loss)?;
        if !value.is_finite() {
            return Err(Error::Divergence { round: step, what: "attack loss" });
        }
        losses.push(value);
        let g = tape.backward(loss)?;
        adam.step(&mut [&mut psi.wc], &[g.get(wc).expect("param")], false)?;
    }
    Ok(losses)
}

/// Link analogue of [`fit_node_head`].
pub fn fit_link_head(
    z: &DenseMatrix,
    phi: &mut PredictorParams,
    adam: &mut AdamState,
    pairs: &[Pair],
    targets: &[f64],
    steps: usize,
) -> Result<Vec<f64>> {
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let mut tape = Tape::new();
        let zv = tape.constant(z.clone());
        let wb = tape.param(phi.wb.clone());
        let loss = link_ce_loss(&mut tape, wb, zv, pairs, targets)?;
        let value = tape.scalar(loss)?;
        if !value.is_finite() {
            return Err(Error::Divergence { round: step, what: "attack loss" });
        }
        losses.push(value);
        let g = tape.backward(loss)?;
        adam.step(&mut [&mut phi.wb], &[g.get(wb).expect("param")], false)?;
    }
    Ok(losses)
}
