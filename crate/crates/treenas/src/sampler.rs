//! Sampling strategies over a search space: uniform, independent per-node,
//! joint Boltzmann, and tree search guided by UCT scores with Boltzmann
//! sampling among siblings. One sampler owns one search loop's state.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{EvalError, EvalOutcome, Evaluator};
use crate::hierarchy::{export_tree, parse_tree, HierarchyError, SearchTree};
use crate::space::{
    enumerate, within_budget, Architecture, Enumeration, SearchSpace, SpaceError,
    DEFAULT_ENUMERATION_CAP,
};

/// Rejection cap for the budget filter.
pub const BUDGET_REJECTION_CAP: usize = 10_000;

/// Rejection cap when an independent sampler must satisfy a space constraint.
const CONSTRAINT_REJECTION_CAP: usize = 100_000;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("budget filter rejected {0} consecutive samples")]
    BudgetExhausted(usize),
    #[error("architecture is not addressed by this sampler")]
    ForeignArchitecture,
    #[error("constraint rejection cap hit after {0} samples")]
    ConstraintExhausted(usize),
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    Linear,
}

/// Sampling temperature over steps. Linear interpolates t_start to t_end
/// across the horizon, then holds t_end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    pub kind: ScheduleKind,
    pub t_start: f64,
    pub t_end: f64,
    pub horizon: u64,
}

impl TemperatureSchedule {
    pub fn constant(t: f64) -> Self {
        TemperatureSchedule {
            kind: ScheduleKind::Constant,
            t_start: t,
            t_end: t,
            horizon: 0,
        }
    }

    pub fn linear(t_start: f64, t_end: f64, horizon: u64) -> Self {
        TemperatureSchedule {
            kind: ScheduleKind::Linear,
            t_start,
            t_end,
            horizon,
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.t_start > 0.0 && self.t_end > 0.0 {
            Ok(())
        } else {
            Err(SamplerError::InvalidConfig(format!(
                "temperatures must be positive, got ({}, {})",
                self.t_start, self.t_end
            )))
        }
    }

    pub fn temperature(&self, step: u64) -> f64 {
        match self.kind {
            ScheduleKind::Constant => self.t_start,
            ScheduleKind::Linear => {
                if self.horizon == 0 || step >= self.horizon {
                    self.t_end
                } else {
                    let frac = step as f64 / self.horizon as f64;
                    self.t_start + (self.t_end - self.t_start) * frac
                }
            }
        }
    }
}

/// UCT exploration score R = C + lambda * sqrt(ln n(parent) / n); +inf for
/// unvisited nodes.
pub fn uct_score(c: f64, visits: u64, parent_visits: u64, lambda: f64) -> f64 {
    if visits == 0 {
        return f64::INFINITY;
    }
    let parent = parent_visits.max(1) as f64;
    c + lambda * (parent.ln() / visits as f64).sqrt()
}

/// EMA smoothing C <- beta*C + (1-beta)*observation.
pub fn ema(old: f64, observation: f64, beta: f64) -> f64 {
    beta * old + (1.0 - beta) * observation
}

/// Boltzmann distribution over scores at temperature t, computed with
/// max-subtraction so adding a constant to all scores changes nothing.
pub fn boltzmann_probs(scores: &[f64], t: f64) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| ((s - max) / t).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Distribution over a node's children: unvisited children pre-empt visited
/// ones uniformly; otherwise a Boltzmann over UCT scores.
pub fn node_probabilities(
    tree: &SearchTree,
    node_id: usize,
    temperature: f64,
    lambda: f64,
) -> Vec<f64> {
    let node = tree.node(node_id);
    let children = &node.children;
    let unvisited: Vec<bool> = children
        .iter()
        .map(|&c| tree.node(c).visits == 0)
        .collect();
    let n_unvisited = unvisited.iter().filter(|&&u| u).count();
    if n_unvisited > 0 {
        let p = 1.0 / n_unvisited as f64;
        return unvisited
            .into_iter()
            .map(|u| if u { p } else { 0.0 })
            .collect();
    }
    let scores: Vec<f64> = children
        .iter()
        .map(|&c| {
            let child = tree.node(c);
            uct_score(child.c, child.visits, node.visits, lambda)
        })
        .collect();
    boltzmann_probs(&scores, temperature)
}

/// Strategy-specific sampler state.
#[derive(Debug, Clone)]
pub enum SamplerState {
    Uniform,
    /// Per-node, per-op smoothed rewards.
    Independent { eps: Vec<Vec<f64>>, beta: f64 },
    /// Per-architecture smoothed rewards.
    Boltzmann { eps: Vec<f64>, beta: f64 },
    Mcts {
        tree: SearchTree,
        lambda: f64,
        beta: f64,
        /// EMA coefficient for equivalence-tagged peers, if enabled.
        regularize: Option<f64>,
        /// Steps before this are sampled uniformly among siblings.
        warmup_until: u64,
    },
}

/// A sampling strategy bound to a space and its enumeration.
#[derive(Debug, Clone)]
pub struct Sampler {
    space: SearchSpace,
    enumeration: Enumeration,
    state: SamplerState,
}

impl Sampler {
    pub fn uniform(space: &SearchSpace) -> Result<Self, SamplerError> {
        Self::with_state(space, SamplerState::Uniform)
    }

    pub fn independent(space: &SearchSpace, beta: f64) -> Result<Self, SamplerError> {
        let eps = space
            .nodes
            .iter()
            .map(|ops| vec![crate::hierarchy::INIT_REWARD; ops.len()])
            .collect();
        Self::with_state(space, SamplerState::Independent { eps, beta })
    }

    pub fn boltzmann(space: &SearchSpace, beta: f64) -> Result<Self, SamplerError> {
        let enumeration = enumerate(space, DEFAULT_ENUMERATION_CAP)?;
        let eps = vec![crate::hierarchy::INIT_REWARD; enumeration.len()];
        Ok(Sampler {
            space: space.clone(),
            enumeration,
            state: SamplerState::Boltzmann { eps, beta },
        })
    }

    pub fn mcts(
        space: &SearchSpace,
        tree: SearchTree,
        lambda: f64,
        beta: f64,
        regularize: Option<f64>,
        warmup_until: u64,
    ) -> Result<Self, SamplerError> {
        let enumeration = enumerate(space, DEFAULT_ENUMERATION_CAP)?;
        if tree.num_archs() != enumeration.len() {
            return Err(SamplerError::InvalidConfig(format!(
                "tree covers {} architectures, space has {}",
                tree.num_archs(),
                enumeration.len()
            )));
        }
        Ok(Sampler {
            space: space.clone(),
            enumeration,
            state: SamplerState::Mcts {
                tree,
                lambda,
                beta,
                regularize,
                warmup_until,
            },
        })
    }

    fn with_state(space: &SearchSpace, state: SamplerState) -> Result<Self, SamplerError> {
        Ok(Sampler {
            space: space.clone(),
            enumeration: enumerate(space, DEFAULT_ENUMERATION_CAP)?,
            state,
        })
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn enumeration(&self) -> &Enumeration {
        &self.enumeration
    }

    pub fn state(&self) -> &SamplerState {
        &self.state
    }

    pub fn tree(&self) -> Option<&SearchTree> {
        match &self.state {
            SamplerState::Mcts { tree, .. } => Some(tree),
            _ => None,
        }
    }

    /// Draws one architecture at the given global step and temperature.
    pub fn sample(
        &self,
        step: u64,
        temperature: f64,
        rng: &mut dyn RngCore,
    ) -> Result<Architecture, SamplerError> {
        match &self.state {
            SamplerState::Uniform => {
                let i = rng.gen_range(0..self.enumeration.len());
                Ok(self.enumeration.arch_at(i).clone())
            }
            SamplerState::Independent { eps, .. } => {
                for attempt in 1..=CONSTRAINT_REJECTION_CAP {
                    let ops: Vec<u8> = eps
                        .iter()
                        .map(|node_eps| {
                            let probs = boltzmann_probs(node_eps, temperature);
                            let dist = WeightedIndex::new(&probs).expect("valid distribution");
                            dist.sample(rng) as u8
                        })
                        .collect();
                    let arch = Architecture::new(ops);
                    if self.space.satisfies_constraint(&arch) {
                        return Ok(arch);
                    }
                    if attempt == CONSTRAINT_REJECTION_CAP {
                        return Err(SamplerError::ConstraintExhausted(attempt));
                    }
                }
                unreachable!()
            }
            SamplerState::Boltzmann { eps, .. } => {
                let probs = boltzmann_probs(eps, temperature);
                let dist = WeightedIndex::new(&probs).expect("valid distribution");
                Ok(self.enumeration.arch_at(dist.sample(rng)).clone())
            }
            SamplerState::Mcts {
                tree,
                lambda,
                warmup_until,
                ..
            } => {
                let mut id = tree.root();
                while !tree.node(id).is_leaf() {
                    let children = &tree.node(id).children;
                    let pick = if step < *warmup_until {
                        rng.gen_range(0..children.len())
                    } else {
                        let probs = node_probabilities(tree, id, temperature, *lambda);
                        WeightedIndex::new(&probs)
                            .expect("valid distribution")
                            .sample(rng)
                    };
                    id = children[pick];
                }
                let arch_idx = tree.node(id).leaf_arch.expect("leaves carry archs");
                Ok(self.enumeration.arch_at(arch_idx).clone())
            }
        }
    }

    /// Like [`Self::sample`], but rejection-resamples until the architecture
    /// passes the FLOPs budget filter. Returns the attempt count.
    pub fn sample_within_budget(
        &self,
        step: u64,
        temperature: f64,
        budget_mflops: f64,
        lower_frac: f64,
        rng: &mut dyn RngCore,
    ) -> Result<(Architecture, usize), SamplerError> {
        for attempt in 1..=BUDGET_REJECTION_CAP {
            let arch = self.sample(step, temperature, rng)?;
            if within_budget(&arch, &self.space, budget_mflops, lower_frac)? {
                return Ok((arch, attempt));
            }
        }
        Err(SamplerError::BudgetExhausted(BUDGET_REJECTION_CAP))
    }

    /// Greedy argmax walk/choice, ignoring visit counts; ties go to the first
    /// candidate in order. This is the T->0, lambda=0 limit.
    fn greedy(&self) -> Architecture {
        match &self.state {
            SamplerState::Uniform => self.enumeration.arch_at(0).clone(),
            SamplerState::Independent { eps, .. } => {
                let ops: Vec<u8> = eps
                    .iter()
                    .map(|node_eps| {
                        let mut best = 0usize;
                        for (o, &v) in node_eps.iter().enumerate() {
                            if v > node_eps[best] {
                                best = o;
                            }
                        }
                        best as u8
                    })
                    .collect();
                let arch = Architecture::new(ops);
                if self.space.satisfies_constraint(&arch) {
                    arch
                } else {
                    // Fall back to the best feasible architecture by summed
                    // node rewards.
                    let mut best: Option<(f64, usize)> = None;
                    for (i, a) in self.enumeration.iter().enumerate() {
                        let score: f64 = a
                            .ops
                            .iter()
                            .enumerate()
                            .map(|(node, &op)| eps[node][op as usize])
                            .sum();
                        if best.is_none_or(|(s, _)| score > s) {
                            best = Some((score, i));
                        }
                    }
                    self.enumeration.arch_at(best.expect("nonempty space").1).clone()
                }
            }
            SamplerState::Boltzmann { eps, .. } => {
                let mut best = 0usize;
                for (i, &v) in eps.iter().enumerate() {
                    if v > eps[best] {
                        best = i;
                    }
                }
                self.enumeration.arch_at(best).clone()
            }
            SamplerState::Mcts { tree, .. } => {
                let mut id = tree.root();
                while !tree.node(id).is_leaf() {
                    let children = &tree.node(id).children;
                    let mut pick = children[0];
                    for &c in children {
                        if tree.node(c).c > tree.node(pick).c {
                            pick = c;
                        }
                    }
                    id = pick;
                }
                self.enumeration
                    .arch_at(tree.node(id).leaf_arch.expect("leaves carry archs"))
                    .clone()
            }
        }
    }

    /// Folds an observed reward back into the state. For tree search this
    /// walks leaf to root applying the EMA, bumps visits, refreshes stored
    /// UCT scores, and optionally spreads the reward to equivalence-tagged
    /// peers without visit increments.
    pub fn update(
        &mut self,
        arch: &Architecture,
        outcome: &EvalOutcome,
    ) -> Result<(), SamplerError> {
        let acc = outcome.accuracy;
        let arch_idx = self
            .enumeration
            .index_of(arch)
            .ok_or(SamplerError::ForeignArchitecture)?;
        match &mut self.state {
            SamplerState::Uniform => Ok(()),
            SamplerState::Independent { eps, beta } => {
                for (node, &op) in arch.ops.iter().enumerate() {
                    let slot = &mut eps[node][op as usize];
                    *slot = ema(*slot, acc, *beta);
                }
                Ok(())
            }
            SamplerState::Boltzmann { eps, beta } => {
                eps[arch_idx] = ema(eps[arch_idx], acc, *beta);
                Ok(())
            }
            SamplerState::Mcts {
                tree,
                lambda,
                beta,
                regularize,
                ..
            } => {
                let leaf = tree.leaf_for_arch(arch_idx);
                let path = tree.path_from_root(leaf);
                for &id in path.iter().rev() {
                    let node = tree.node_mut(id);
                    node.c = ema(node.c, acc, *beta);
                    node.visits += 1;
                }
                if let Some(beta_reg) = *regularize {
                    for &id in &path {
                        let Some(tag) = tree.node(id).tag else { continue };
                        let peers: Vec<usize> = tree
                            .tagged_nodes(tag)
                            .iter()
                            .copied()
                            .filter(|&p| p != id)
                            .collect();
                        for p in peers {
                            let node = tree.node_mut(p);
                            node.c = ema(node.c, acc, beta_reg);
                        }
                    }
                }
                // Refresh stored scores where C or a visit count moved: the
                // children of every path node, and regularized peers.
                let mut stale: Vec<usize> = Vec::new();
                for &id in &path {
                    stale.extend(tree.node(id).children.iter().copied());
                }
                if regularize.is_some() {
                    for &id in &path {
                        if let Some(tag) = tree.node(id).tag {
                            stale.extend(tree.tagged_nodes(tag).iter().copied());
                        }
                    }
                }
                for id in stale {
                    let parent_visits = tree.node(id)
                        .parent
                        .map(|p| tree.node(p).visits)
                        .unwrap_or(0);
                    let node = tree.node_mut(id);
                    node.r = uct_score(node.c, node.visits, parent_visits, *lambda);
                }
                Ok(())
            }
        }
    }

    /// Final selection: one greedy draw, then k-1 draws without exploration
    /// (lambda = 0) at the given temperature; deduplicates, evaluates each at
    /// full progress, and sorts by accuracy descending (ties by canonical
    /// index).
    pub fn select_final(
        &self,
        evaluator: &dyn Evaluator,
        k: usize,
        temperature: f64,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<(Architecture, f64)>, SamplerError> {
        let mut picked: Vec<usize> = Vec::new();
        let push = |arch: Architecture, picked: &mut Vec<usize>| {
            let idx = self.enumeration.index_of(&arch).expect("own architecture");
            if !picked.contains(&idx) {
                picked.push(idx);
            }
        };
        if k >= 1 {
            push(self.greedy(), &mut picked);
        }
        for _ in 1..k {
            let arch = self.sample_no_exploration(temperature, rng)?;
            push(arch, &mut picked);
        }
        let mut scored: Vec<(usize, f64)> = Vec::with_capacity(picked.len());
        for idx in picked {
            let arch = self.enumeration.arch_at(idx);
            let outcome = evaluator.evaluate(arch, 1.0, rng)?;
            scored.push((idx, outcome.accuracy));
        }
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("accuracies are finite")
                .then(a.0.cmp(&b.0))
        });
        Ok(scored
            .into_iter()
            .map(|(idx, acc)| (self.enumeration.arch_at(idx).clone(), acc))
            .collect())
    }

    /// One draw with the exploration bonus off (lambda = 0 for tree search;
    /// flat samplers sample from their reward softmax as usual).
    fn sample_no_exploration(
        &self,
        temperature: f64,
        rng: &mut dyn RngCore,
    ) -> Result<Architecture, SamplerError> {
        match &self.state {
            SamplerState::Mcts { tree, .. } => {
                let mut id = tree.root();
                while !tree.node(id).is_leaf() {
                    let probs = node_probabilities(tree, id, temperature, 0.0);
                    let pick = WeightedIndex::new(&probs)
                        .expect("valid distribution")
                        .sample(rng);
                    id = tree.node(id).children[pick];
                }
                Ok(self
                    .enumeration
                    .arch_at(tree.node(id).leaf_arch.expect("leaves carry archs"))
                    .clone())
            }
            _ => self.sample(u64::MAX, temperature, rng),
        }
    }

    /// Serializes kind, hyperparameters, and full state for checkpointing.
    pub fn checkpoint_json(&self) -> String {
        let ck = match &self.state {
            SamplerState::Uniform => CheckpointJson {
                kind: "uniform".into(),
                ..CheckpointJson::default()
            },
            SamplerState::Independent { eps, beta } => CheckpointJson {
                kind: "independent".into(),
                beta: Some(*beta),
                eps_nodes: Some(eps.clone()),
                ..CheckpointJson::default()
            },
            SamplerState::Boltzmann { eps, beta } => CheckpointJson {
                kind: "boltzmann".into(),
                beta: Some(*beta),
                eps_archs: Some(eps.clone()),
                ..CheckpointJson::default()
            },
            SamplerState::Mcts {
                tree,
                lambda,
                beta,
                regularize,
                warmup_until,
            } => CheckpointJson {
                kind: "mcts".into(),
                beta: Some(*beta),
                lambda: Some(*lambda),
                beta_reg: *regularize,
                warmup_until: Some(*warmup_until),
                tree: Some(export_tree(tree)),
                tree_stats: Some(tree.stats_json()),
                ..CheckpointJson::default()
            },
        };
        serde_json::to_string_pretty(&ck).expect("checkpoint serialization cannot fail")
    }

    /// Restores a sampler from [`Self::checkpoint_json`] output.
    pub fn from_checkpoint_json(space: &SearchSpace, text: &str) -> Result<Self, SamplerError> {
        let ck: CheckpointJson = serde_json::from_str(text)
            .map_err(|e| SamplerError::InvalidConfig(format!("malformed checkpoint: {e}")))?;
        let beta = ck.beta.unwrap_or(0.95);
        match ck.kind.as_str() {
            "uniform" => Self::uniform(space),
            "independent" => {
                let mut s = Self::independent(space, beta)?;
                if let Some(eps) = ck.eps_nodes {
                    match &mut s.state {
                        SamplerState::Independent { eps: slot, .. } => *slot = eps,
                        _ => unreachable!(),
                    }
                }
                Ok(s)
            }
            "boltzmann" => {
                let mut s = Self::boltzmann(space, beta)?;
                if let Some(eps) = ck.eps_archs {
                    match &mut s.state {
                        SamplerState::Boltzmann { eps: slot, .. } => *slot = eps,
                        _ => unreachable!(),
                    }
                }
                Ok(s)
            }
            "mcts" => {
                let text = ck.tree.ok_or_else(|| {
                    SamplerError::InvalidConfig("mcts checkpoint lacks tree".into())
                })?;
                let mut tree = parse_tree(&text)?;
                if let Some(stats) = ck.tree_stats {
                    tree.apply_stats_json(&stats)?;
                }
                Self::mcts(
                    space,
                    tree,
                    ck.lambda.unwrap_or(0.5),
                    beta,
                    ck.beta_reg,
                    ck.warmup_until.unwrap_or(0),
                )
            }
            other => Err(SamplerError::InvalidConfig(format!(
                "unknown sampler kind \"{other}\""
            ))),
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CheckpointJson {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta_reg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    warmup_until: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps_nodes: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps_archs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tree: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tree_stats: Option<String>,
}
