//! Additive NARX assembly.
//!
//! The one-step forecast is the sum of `n` per-lag nodes,
//! `yhat(k) = sum_l f_l(y(k-l), x(k-l))`, fed by two delay lines. Nodes are
//! trained either jointly (one learner over the stacked regressor, since the
//! whole model is linear in all weights) or independently (each node is its
//! own predictor of `y(k)`, as the weighted ensemble requires).
//!
//! Lags that have not been observed yet contribute zero and their nodes skip
//! training, which keeps streaming total from the first sample.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::{Learner, LearnerSpec};
use crate::membership::{GaussianGrid, KnotGrid};
use crate::nodes::{NeoFuzzyNode, Node, WangMendelNode};

/// Tapped delay line; `lag(1)` is the most recent value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayLine {
    capacity: usize,
    buffer: VecDeque<f64>,
}

impl DelayLine {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            buffer: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, value: f64) {
        self.buffer.push_front(value);
        self.buffer.truncate(self.capacity);
    }

    /// Value observed `l` steps ago (1-based), if any.
    pub fn lag(&self, l: usize) -> Option<f64> {
        if l == 0 {
            return None;
        }
        self.buffer.get(l - 1).copied()
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Only grows; shrinking would discard history a re-added node needs.
    pub fn reserve_lags(&mut self, capacity: usize) {
        self.capacity = self.capacity.max(capacity);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    NeoFuzzy,
    WangMendel,
}

impl std::str::FromStr for NodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neo_fuzzy" => Ok(Self::NeoFuzzy),
            "wang_mendel" => Ok(Self::WangMendel),
            other => Err(Error::InvalidConfig(format!("unknown node kind '{other}'"))),
        }
    }
}

/// `Nar` feeds the lagged output into both node inputs (no exogenous series).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    Nar,
    Narx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    Stacked,
    Independent,
}

impl std::str::FromStr for TrainingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stacked" => Ok(Self::Stacked),
            "independent" => Ok(Self::Independent),
            other => Err(Error::InvalidConfig(format!(
                "unknown training mode '{other}'"
            ))),
        }
    }
}

/// Everything needed to build an [`AnarxModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub node_kind: NodeKind,
    pub n_nodes: usize,
    pub h: usize,
    pub q: usize,
    pub y_range: (f64, f64),
    pub x_range: (f64, f64),
    pub learner: LearnerSpec,
    pub training: TrainingMode,
    pub mode: InputMode,
    /// Delay-line capacity; at least `n_nodes`.
    pub max_lag: usize,
}

impl ModelConfig {
    fn template(&self) -> Result<Node> {
        Ok(match self.node_kind {
            NodeKind::NeoFuzzy => {
                let gy = KnotGrid::uniform(self.y_range.0, self.y_range.1, self.h, self.q)?;
                let gx = KnotGrid::uniform(self.x_range.0, self.x_range.1, self.h, self.q)?;
                Node::NeoFuzzy(NeoFuzzyNode::new(gy, gx))
            }
            NodeKind::WangMendel => {
                let gy = GaussianGrid::uniform(self.y_range.0, self.y_range.1, self.h)?;
                let gx = GaussianGrid::uniform(self.x_range.0, self.x_range.1, self.h)?;
                Node::WangMendel(WangMendelNode::new(gy, gx)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "state", rename_all = "snake_case")]
enum Learners {
    Stacked(Learner),
    Independent(Vec<Learner>),
}

/// A node whose update failed during a step. `node` is `None` when the
/// joint (stacked) update failed.
#[derive(Debug)]
pub struct NodeFailure {
    pub node: Option<usize>,
    pub error: Error,
}

/// Result of one streaming step.
#[derive(Debug)]
pub struct StepReport {
    /// Sum of node forecasts before the update.
    pub prediction: f64,
    pub error: f64,
    /// Per-node forecasts `yhat^l(k)` before the update (0 for inactive lags).
    pub node_forecasts: Vec<f64>,
    /// Number of nodes whose lag was available this step.
    pub active: usize,
    pub failures: Vec<NodeFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "change", content = "node", rename_all = "snake_case")]
pub enum StructureChange {
    None,
    /// 1-based index of the appended node.
    Added(usize),
    /// 1-based index of the removed node.
    Removed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnarxModel {
    nodes: Vec<Node>,
    learners: Learners,
    learner_spec: LearnerSpec,
    template: Node,
    delay_y: DelayLine,
    delay_x: DelayLine,
    mode: InputMode,
}

impl AnarxModel {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        if config.n_nodes == 0 {
            return Err(Error::InvalidConfig("n_nodes must be at least 1".into()));
        }
        config.learner.validate()?;
        let template = config.template()?;
        let nodes = vec![template.clone(); config.n_nodes];
        let dim = template.dim();
        let learners = match config.training {
            TrainingMode::Stacked => Learners::Stacked(config.learner.build(dim * config.n_nodes)?),
            TrainingMode::Independent => Learners::Independent(
                (0..config.n_nodes)
                    .map(|_| config.learner.build(dim))
                    .collect::<Result<_>>()?,
            ),
        };
        let capacity = config.max_lag.max(config.n_nodes);
        Ok(Self {
            nodes,
            learners,
            learner_spec: config.learner,
            template,
            delay_y: DelayLine::new(capacity),
            delay_x: DelayLine::new(capacity),
            mode: config.mode,
        })
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn mode(&self) -> InputMode {
        self.mode
    }

    pub fn training(&self) -> TrainingMode {
        match self.learners {
            Learners::Stacked(_) => TrainingMode::Stacked,
            Learners::Independent(_) => TrainingMode::Independent,
        }
    }

    pub fn learner_spec(&self) -> &LearnerSpec {
        &self.learner_spec
    }

    /// Independent mode: one learner per node. Stacked: the joint learner.
    pub fn learners(&self) -> Vec<&Learner> {
        match &self.learners {
            Learners::Stacked(l) => vec![l],
            Learners::Independent(ls) => ls.iter().collect(),
        }
    }

    pub fn learner_count(&self) -> usize {
        match &self.learners {
            Learners::Stacked(_) => 1,
            Learners::Independent(ls) => ls.len(),
        }
    }

    pub fn delay_y(&self) -> &DelayLine {
        &self.delay_y
    }

    pub fn delay_x(&self) -> &DelayLine {
        &self.delay_x
    }

    /// Total adjustable node weights.
    pub fn weight_count(&self) -> usize {
        self.nodes.iter().map(Node::dim).sum()
    }

    /// Scalar gains held by the learners.
    pub fn gain_count(&self) -> usize {
        self.learners().iter().map(|l| l.scalar_gains()).sum()
    }

    /// Inputs of node `l` (1-based) if both lags are available.
    pub fn lagged_inputs(&self, l: usize) -> Option<(f64, f64)> {
        let y = self.delay_y.lag(l)?;
        let x = match self.mode {
            InputMode::Nar => y,
            InputMode::Narx => self.delay_x.lag(l)?,
        };
        Some((y, x))
    }

    /// Number of nodes whose lags are available.
    pub fn active_nodes(&self) -> usize {
        (1..=self.n())
            .take_while(|&l| self.lagged_inputs(l).is_some())
            .count()
    }

    pub fn warmed_up(&self) -> bool {
        self.active_nodes() == self.n()
    }

    /// Per-node forecasts for the next step; inactive lags give 0.
    pub fn node_forecasts(&self) -> Result<Vec<f64>> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, node)| match self.lagged_inputs(i + 1) {
                Some((y, x)) => node.forward(y, x),
                None => Ok(0.0),
            })
            .collect()
    }

    /// One-step-ahead forecast `sum_l f_l(y(k-l), x(k-l))`.
    pub fn forward(&self) -> Result<f64> {
        Ok(self.node_forecasts()?.iter().sum())
    }

    /// Forecast, learn from `y_new`, then shift `(y_new, x_new)` into the
    /// delay lines.
    pub fn train_step(&mut self, y_new: f64, x_new: f64) -> Result<StepReport> {
        self.step(y_new, x_new, true)
    }

    /// Forecast and shift without learning.
    pub fn observe(&mut self, y_new: f64, x_new: f64) -> Result<StepReport> {
        self.step(y_new, x_new, false)
    }

    fn step(&mut self, y_new: f64, x_new: f64, learn: bool) -> Result<StepReport> {
        if !y_new.is_finite() || (self.mode == InputMode::Narx && !x_new.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "non-finite observation ({y_new}, {x_new})"
            )));
        }
        let n = self.n();
        let mut failures = Vec::new();
        let mut regressors: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
        let mut node_forecasts = Vec::with_capacity(n);
        for (i, node) in self.nodes.iter().enumerate() {
            let phi = match self.lagged_inputs(i + 1) {
                Some((y, x)) => match node.regressor(y, x) {
                    Ok(phi) => Some(phi),
                    Err(error) => {
                        failures.push(NodeFailure {
                            node: Some(i + 1),
                            error,
                        });
                        None
                    }
                },
                None => None,
            };
            let f = phi
                .as_ref()
                .map(|p| node.weights().iter().zip(p).map(|(w, v)| w * v).sum())
                .unwrap_or(0.0);
            node_forecasts.push(f);
            regressors.push(phi);
        }
        let active = regressors.iter().filter(|p| p.is_some()).count();
        let prediction: f64 = node_forecasts.iter().sum();

        if learn && active > 0 {
            match &mut self.learners {
                Learners::Stacked(learner) => {
                    let mut stacked = Vec::with_capacity(learner.dim());
                    for (node, phi) in self.nodes.iter().zip(&regressors) {
                        match phi {
                            Some(p) => stacked.extend_from_slice(p),
                            None => stacked.extend(std::iter::repeat_n(0.0, node.dim())),
                        }
                    }
                    match learner.step(&stacked, y_new) {
                        Ok(_) => {
                            let w = learner.weights();
                            let mut offset = 0;
                            for node in &mut self.nodes {
                                let d = node.dim();
                                node.set_weights(&w[offset..offset + d]);
                                offset += d;
                            }
                        }
                        Err(error) => failures.push(NodeFailure { node: None, error }),
                    }
                }
                Learners::Independent(learners) => {
                    for (i, ((node, learner), phi)) in self
                        .nodes
                        .iter_mut()
                        .zip(learners.iter_mut())
                        .zip(&regressors)
                        .enumerate()
                    {
                        let Some(phi) = phi else { continue };
                        match learner.step(phi, y_new) {
                            Ok(_) => node.set_weights(learner.weights()),
                            Err(error) => failures.push(NodeFailure {
                                node: Some(i + 1),
                                error,
                            }),
                        }
                    }
                }
            }
        }

        self.delay_y.push(y_new);
        if self.mode == InputMode::Narx {
            self.delay_x.push(x_new);
        }
        Ok(StepReport {
            prediction,
            error: y_new - prediction,
            node_forecasts,
            active,
            failures,
        })
    }

    /// Appends node `n + 1` with zero weights and a fresh learner block.
    pub fn add_node(&mut self) -> Result<()> {
        let node = self.template.zeroed();
        let dim = node.dim();
        match &mut self.learners {
            Learners::Stacked(l) => l.extend(dim, self.learner_spec.p0),
            Learners::Independent(ls) => ls.push(self.learner_spec.build(dim)?),
        }
        self.nodes.push(node);
        let n = self.n();
        self.delay_y.reserve_lags(n);
        self.delay_x.reserve_lags(n);
        Ok(())
    }

    /// Drops node `n`. Refuses to remove the last remaining node.
    pub fn remove_last_node(&mut self) -> Result<()> {
        if self.n() <= 1 {
            return Err(Error::InvalidConfig("cannot remove the only node".into()));
        }
        let node = self.nodes.pop().expect("n > 1");
        match &mut self.learners {
            Learners::Stacked(l) => l.truncate(l.dim() - node.dim()),
            Learners::Independent(ls) => {
                ls.pop();
            }
        }
        Ok(())
    }

    /// Checks the structural invariants; used by tests and snapshot loading.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::CorruptSnapshot(m.to_string()));
        if self.nodes.is_empty() {
            return fail("model has no nodes");
        }
        match &self.learners {
            Learners::Stacked(l) => {
                if l.dim() != self.weight_count() {
                    return fail("stacked learner dimension does not match node weights");
                }
                let mut offset = 0;
                for node in &self.nodes {
                    if node.weights() != &l.weights()[offset..offset + node.dim()] {
                        return fail("node weights out of sync with stacked learner");
                    }
                    offset += node.dim();
                }
            }
            Learners::Independent(ls) => {
                if ls.len() != self.nodes.len() {
                    return fail("learner count differs from node count");
                }
                for (node, l) in self.nodes.iter().zip(ls) {
                    if node.weights() != l.weights() {
                        return fail("node weights out of sync with learner");
                    }
                }
            }
        }
        if self.delay_y.capacity() < self.n() || self.delay_x.capacity() < self.n() {
            return fail("delay lines shorter than the node count");
        }
        Ok(())
    }
}

/// When to grow or shrink the node pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionPolicy {
    pub window: usize,
    pub add_threshold: f64,
    pub remove_threshold: f64,
    pub n_min: usize,
    pub n_max: usize,
    /// Thresholds are multiples of the long-run RMSE rather than absolute.
    pub relative: bool,
}

impl Default for EvolutionPolicy {
    fn default() -> Self {
        Self {
            window: 100,
            add_threshold: 1.5,
            remove_threshold: 0.75,
            n_min: 1,
            n_max: 10,
            relative: true,
        }
    }
}

impl EvolutionPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidConfig(
                "evolution window must be positive".into(),
            ));
        }
        if self.n_min == 0 || self.n_min > self.n_max {
            return Err(Error::InvalidConfig("need 1 <= n_min <= n_max".into()));
        }
        if !(self.add_threshold > self.remove_threshold && self.remove_threshold >= 0.0) {
            return Err(Error::InvalidConfig(
                "need add_threshold > remove_threshold >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Windowed error and contribution statistics feeding [`evolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMonitor {
    window: usize,
    squared_errors: VecDeque<f64>,
    contributions: Vec<VecDeque<f64>>,
    total_sq: f64,
    total_count: u64,
}

impl ErrorMonitor {
    pub fn new(window: usize, n: usize) -> Self {
        Self {
            window,
            squared_errors: VecDeque::with_capacity(window),
            contributions: vec![VecDeque::with_capacity(window); n],
            total_sq: 0.0,
            total_count: 0,
        }
    }

    pub fn record(&mut self, error: f64, contributions: &[f64]) {
        if self.squared_errors.len() == self.window {
            self.squared_errors.pop_front();
        }
        self.squared_errors.push_back(error * error);
        self.total_sq += error * error;
        self.total_count += 1;
        self.contributions
            .resize(contributions.len(), VecDeque::new());
        for (track, c) in self.contributions.iter_mut().zip(contributions) {
            if track.len() == self.window {
                track.pop_front();
            }
            track.push_back(c.abs());
        }
    }

    pub fn is_full(&self) -> bool {
        self.squared_errors.len() == self.window
    }

    pub fn windowed_rmse(&self) -> f64 {
        if self.squared_errors.is_empty() {
            return 0.0;
        }
        (self.squared_errors.iter().sum::<f64>() / self.squared_errors.len() as f64).sqrt()
    }

    pub fn long_run_rmse(&self) -> f64 {
        if self.total_count == 0 {
            return 0.0;
        }
        (self.total_sq / self.total_count as f64).sqrt()
    }

    pub fn mean_abs_contribution(&self, l: usize) -> Option<f64> {
        let track = self.contributions.get(l.checked_sub(1)?)?;
        if track.is_empty() {
            return None;
        }
        Some(track.iter().sum::<f64>() / track.len() as f64)
    }

    /// Forgets the window (after a structure change); long-run totals stay.
    pub fn reset_window(&mut self, n: usize) {
        self.squared_errors.clear();
        self.contributions = vec![VecDeque::with_capacity(self.window); n];
    }
}

/// Applies at most one structure change. Existing nodes are never touched
/// except the removed one.
pub fn evolve(
    model: &mut AnarxModel,
    policy: &EvolutionPolicy,
    stats: &ErrorMonitor,
) -> Result<StructureChange> {
    if !stats.is_full() {
        return Ok(StructureChange::None);
    }
    let scale = if policy.relative {
        stats.long_run_rmse()
    } else {
        1.0
    };
    let rmse = stats.windowed_rmse();
    let n = model.n();
    if rmse > policy.add_threshold * scale && n < policy.n_max {
        model.add_node()?;
        return Ok(StructureChange::Added(n + 1));
    }
    if rmse < policy.remove_threshold * scale && n > policy.n_min.max(1) {
        let means: Option<Vec<f64>> = (1..=n).map(|l| stats.mean_abs_contribution(l)).collect();
        if let Some(means) = means {
            let last = means[n - 1];
            if means.iter().all(|&m| last <= m) {
                model.remove_last_node()?;
                return Ok(StructureChange::Removed(n));
            }
        }
    }
    Ok(StructureChange::None)
}
