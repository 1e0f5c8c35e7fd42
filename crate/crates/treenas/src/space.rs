//! Discrete architecture search spaces: node arities, assignment constraints,
//! FLOPs cost models, and the vector encodings used for zero-cost distances.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default upper bound on the number of assignments `enumerate` will expand.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("space cardinality {cardinality} exceeds enumeration cap {cap}")]
    CapacityExceeded { cardinality: u128, cap: u64 },
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("space has no cost model")]
    NoCostModel,
    #[error("invalid space definition: {0}")]
    InvalidSpace(String),
}

/// A fixed-length assignment of operation indices, one per node of a space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Architecture {
    pub ops: Vec<u8>,
}

impl Architecture {
    pub fn new(ops: Vec<u8>) -> Self {
        Architecture { ops }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Parses the digit-string text form, e.g. "22212220".
    pub fn from_digits(s: &str) -> Result<Self, SpaceError> {
        let ops = s
            .chars()
            .map(|c| {
                c.to_digit(10)
                    .map(|d| d as u8)
                    .ok_or_else(|| SpaceError::InvalidArch(format!("non-digit '{c}' in \"{s}\"")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Architecture { ops })
    }

    /// Digit-string text form; only valid for spaces with at most 10 ops per node.
    pub fn to_digits(&self) -> String {
        self.ops.iter().map(|&o| char::from(b'0' + o)).collect()
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ops.iter().all(|&o| o < 10) {
            write!(f, "{}", self.to_digits())
        } else {
            let parts: Vec<String> = self.ops.iter().map(|o| o.to_string()).collect();
            write!(f, "[{}]", parts.join(","))
        }
    }
}

/// Predicate over full assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    /// Exactly `count` nodes must select an operation labelled `op`.
    ExactCount { op: String, count: usize },
}

/// Static FLOPs model; costs are dimensionless counts reported in MFLOPs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostModel {
    /// `base + sum(costs[node][op])` over the assignment.
    PerOp { base: f64, costs: Vec<Vec<f64>> },
    /// Lookup keyed by digit-string form.
    Table { costs: BTreeMap<String, f64> },
}

/// A product space of discrete operation choices with an optional constraint
/// and cost model. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    /// One label list per node; arity is the list length.
    pub nodes: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<Constraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_model: Option<CostModel>,
}

impl SearchSpace {
    pub fn new(
        nodes: Vec<Vec<String>>,
        constraint: Option<Constraint>,
        cost_model: Option<CostModel>,
    ) -> Result<Self, SpaceError> {
        let space = SearchSpace {
            nodes,
            constraint,
            cost_model,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<(), SpaceError> {
        if self.nodes.is_empty() {
            return Err(SpaceError::InvalidSpace("space has no nodes".into()));
        }
        for (i, labels) in self.nodes.iter().enumerate() {
            if labels.len() < 2 {
                return Err(SpaceError::InvalidSpace(format!(
                    "node {i} has arity {} (must be >= 2)",
                    labels.len()
                )));
            }
        }
        if let Some(CostModel::PerOp { costs, .. }) = &self.cost_model {
            if costs.len() != self.nodes.len()
                || costs
                    .iter()
                    .zip(&self.nodes)
                    .any(|(c, n)| c.len() != n.len())
            {
                return Err(SpaceError::InvalidSpace(
                    "per-op cost table shape does not match node arities".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SpaceError> {
        let space: SearchSpace = serde_json::from_str(text)
            .map_err(|e| SpaceError::InvalidSpace(format!("malformed space JSON: {e}")))?;
        space.validate()?;
        Ok(space)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn arity(&self, node: usize) -> usize {
        self.nodes[node].len()
    }

    /// Product of node arities, ignoring the constraint.
    pub fn raw_cardinality(&self) -> u128 {
        self.nodes
            .iter()
            .fold(1u128, |acc, n| acc.saturating_mul(n.len() as u128))
    }

    /// Length of the concatenated one-hot encoding.
    pub fn one_hot_len(&self) -> usize {
        self.nodes.iter().map(|n| n.len()).sum()
    }

    pub fn contains(&self, arch: &Architecture) -> bool {
        arch.ops.len() == self.nodes.len()
            && arch
                .ops
                .iter()
                .zip(&self.nodes)
                .all(|(&o, labels)| (o as usize) < labels.len())
            && self.satisfies_constraint(arch)
    }

    pub fn satisfies_constraint(&self, arch: &Architecture) -> bool {
        match &self.constraint {
            None => true,
            Some(Constraint::ExactCount { op, count }) => {
                let hits = arch
                    .ops
                    .iter()
                    .enumerate()
                    .filter(|(i, &o)| self.nodes[*i].get(o as usize).map(String::as_str) == Some(op))
                    .count();
                hits == *count
            }
        }
    }

    /// Validates shape and constraint, for callers that need an error value.
    pub fn check(&self, arch: &Architecture) -> Result<(), SpaceError> {
        if arch.ops.len() != self.nodes.len() {
            return Err(SpaceError::InvalidArch(format!(
                "length {} does not match {} nodes",
                arch.ops.len(),
                self.nodes.len()
            )));
        }
        for (i, &o) in arch.ops.iter().enumerate() {
            if o as usize >= self.nodes[i].len() {
                return Err(SpaceError::InvalidArch(format!(
                    "op {o} out of range at node {i} (arity {})",
                    self.nodes[i].len()
                )));
            }
        }
        if !self.satisfies_constraint(arch) {
            return Err(SpaceError::InvalidArch(format!(
                "{arch} violates the space constraint"
            )));
        }
        Ok(())
    }

    /// FLOPs of one architecture under the space's cost model.
    pub fn cost(&self, arch: &Architecture) -> Result<f64, SpaceError> {
        let model = self.cost_model.as_ref().ok_or(SpaceError::NoCostModel)?;
        match model {
            CostModel::PerOp { base, costs } => Ok(base
                + arch
                    .ops
                    .iter()
                    .enumerate()
                    .map(|(i, &o)| costs[i][o as usize])
                    .sum::<f64>()),
            CostModel::Table { costs } => costs
                .get(&arch.to_digits())
                .copied()
                .ok_or_else(|| SpaceError::InvalidArch(format!("{arch} not in cost table"))),
        }
    }
}

/// All constraint-satisfying assignments of a space in canonical
/// (lexicographic over node indices) order, plus the inverse index.
#[derive(Debug, Clone)]
pub struct Enumeration {
    archs: Vec<Architecture>,
    index: HashMap<Vec<u8>, usize>,
}

impl Enumeration {
    pub fn len(&self) -> usize {
        self.archs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.archs.is_empty()
    }

    pub fn archs(&self) -> &[Architecture] {
        &self.archs
    }

    pub fn arch_at(&self, i: usize) -> &Architecture {
        &self.archs[i]
    }

    pub fn index_of(&self, arch: &Architecture) -> Option<usize> {
        self.index.get(&arch.ops).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Architecture> {
        self.archs.iter()
    }
}

/// Expands every constraint-satisfying assignment in canonical index order.
///
/// The cap is checked against the unconstrained product: a space too large to
/// scan is rejected before any work happens.
pub fn enumerate(space: &SearchSpace, cap: u64) -> Result<Enumeration, SpaceError> {
    let raw = space.raw_cardinality();
    if raw > cap as u128 {
        return Err(SpaceError::CapacityExceeded {
            cardinality: raw,
            cap,
        });
    }
    let n = space.num_nodes();
    let mut archs = Vec::new();
    let mut current = vec![0u8; n];
    loop {
        let candidate = Architecture::new(current.clone());
        if space.satisfies_constraint(&candidate) {
            archs.push(candidate);
        }
        // Odometer increment, most significant digit first.
        let mut pos = n;
        while pos > 0 {
            pos -= 1;
            if (current[pos] as usize) + 1 < space.arity(pos) {
                current[pos] += 1;
                break;
            }
            current[pos] = 0;
            if pos == 0 {
                let index = archs
                    .iter()
                    .enumerate()
                    .map(|(i, a)| (a.ops.clone(), i))
                    .collect();
                return Ok(Enumeration { archs, index });
            }
        }
    }
}

/// Layer-count representation `[h, m, l]` of a Pooling-space architecture:
/// layers at high/middle/low feature-map resolution, summing to 10.
pub fn pooling_repr(arch: &Architecture) -> Result<[usize; 3], SpaceError> {
    if arch.ops.len() != 9 || arch.ops.iter().any(|&o| o > 1) {
        return Err(SpaceError::InvalidArch(format!(
            "{arch} is not a 9-node binary pooling assignment"
        )));
    }
    let gaps: Vec<usize> = arch
        .ops
        .iter()
        .enumerate()
        .filter(|(_, &o)| o == 1)
        .map(|(i, _)| i + 1)
        .collect();
    if gaps.len() != 2 {
        return Err(SpaceError::InvalidArch(format!(
            "{arch} has {} pools, expected exactly 2",
            gaps.len()
        )));
    }
    let (first, second) = (gaps[0], gaps[1]);
    Ok([first, second - first, 10 - second])
}

/// Inverse of [`pooling_repr`]: layer counts back to the gap assignment.
pub fn pooling_arch(repr: [usize; 3]) -> Result<Architecture, SpaceError> {
    let [h, m, l] = repr;
    if h + m + l != 10 || h == 0 || m == 0 || l == 0 {
        return Err(SpaceError::InvalidArch(format!(
            "[{h},{m},{l}] is not a valid pooling layer split"
        )));
    }
    let mut ops = vec![0u8; 9];
    ops[h - 1] = 1;
    ops[h + m - 1] = 1;
    Ok(Architecture::new(ops))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    OneHot,
    Vector,
}

/// Real-vector encoding of an architecture.
///
/// `OneHot` concatenates per-node indicator blocks; `Vector` uses the raw op
/// indices. With `weighted`, node `l`'s block is scaled by `2^(-l)` so early
/// nodes dominate distances.
pub fn encode(
    space: &SearchSpace,
    arch: &Architecture,
    kind: EncodingKind,
    weighted: bool,
) -> Result<Vec<f64>, SpaceError> {
    space.check(arch)?;
    let mut out = Vec::new();
    for (l, &op) in arch.ops.iter().enumerate() {
        let w = if weighted { 0.5f64.powi(l as i32) } else { 1.0 };
        match kind {
            EncodingKind::OneHot => {
                for o in 0..space.arity(l) {
                    out.push(if o == op as usize { w } else { 0.0 });
                }
            }
            EncodingKind::Vector => out.push(op as f64 * w),
        }
    }
    Ok(out)
}

/// True iff `lower_frac * budget <= cost(arch) <= budget`.
pub fn within_budget(
    arch: &Architecture,
    space: &SearchSpace,
    budget_mflops: f64,
    lower_frac: f64,
) -> Result<bool, SpaceError> {
    if !(lower_frac > 0.0 && lower_frac <= 1.0) {
        return Err(SpaceError::InvalidSpace(format!(
            "lower_frac {lower_frac} outside (0, 1]"
        )));
    }
    let cost = space.cost(arch)?;
    Ok(cost >= lower_frac * budget_mflops && cost <= budget_mflops)
}

/// The 36-architecture Pooling space: 9 binary pool/identity gap decisions
/// with exactly two pools.
pub fn pooling_space() -> SearchSpace {
    SearchSpace {
        nodes: vec![vec!["identity".into(), "pool".into()]; 9],
        constraint: Some(Constraint::ExactCount {
            op: "pool".into(),
            count: 2,
        }),
        cost_model: None,
    }
}

/// The 6561-architecture macro space: 8 nodes, 3 ops each, no constraint.
/// Carries an additive per-op MFLOPs model so budget filtering is usable.
pub fn bench_macro_space() -> SearchSpace {
    let ops = vec!["identity".to_string(), "mb3_k3".to_string(), "mb6_k5".to_string()];
    // Later layers run at lower resolution, so their per-op cost shrinks.
    let layer_scale = [1.0, 1.0, 0.8, 0.8, 0.6, 0.6, 0.5, 0.5];
    let costs = layer_scale
        .iter()
        .map(|s| vec![0.0, 24.0 * s, 60.0 * s])
        .collect();
    SearchSpace {
        nodes: vec![ops; 8],
        constraint: None,
        cost_model: Some(CostModel::PerOp { base: 20.0, costs }),
    }
}
