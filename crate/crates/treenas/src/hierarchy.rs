//! Search trees over architecture sets: agglomerative clustering of a
//! distance matrix, the layer-order default tree, the random-matrix baseline
//! tree, and the accuracy-partition ablation tree. Trees carry the per-node
//! visit/reward statistics that tree search mutates.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::{random_matrix, DistanceError, DistanceMatrix};
use crate::eval::{EvalError, Evaluator};
use crate::space::{enumerate, SearchSpace, SpaceError, DEFAULT_ENUMERATION_CAP};

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("default trees require an unconstrained space")]
    ConstraintUnsupported,
    #[error("malformed tree text: {0}")]
    Parse(String),
    #[error("tree invariant violated: {0}")]
    Invalid(String),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Linkage rule for the Lance-Williams distance update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Single,
    Complete,
    Average,
    Ward,
}

impl Linkage {
    pub fn name(self) -> &'static str {
        match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
            Linkage::Ward => "ward",
        }
    }

    pub fn parse(s: &str) -> Option<Linkage> {
        match s {
            "single" => Some(Linkage::Single),
            "complete" => Some(Linkage::Complete),
            "average" => Some(Linkage::Average),
            "ward" => Some(Linkage::Ward),
            _ => None,
        }
    }
}

/// One merge step: cluster ids (leaves are 0..n-1, merge k creates id n+k)
/// with a < b, at the linkage distance the merge happened.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

/// Initial smoothed reward: an uninformative mid-accuracy prior.
pub const INIT_REWARD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub parent: Option<usize>,
    /// Ordered; clustering merges put the smaller cluster id first.
    pub children: Vec<usize>,
    /// Canonical architecture index for leaves.
    pub leaf_arch: Option<usize>,
    /// Visit count n(a_i).
    pub visits: u64,
    /// Smoothed reward C(a_i).
    pub c: f64,
    /// Exploration score R(a_i); +inf sentinel until first visit.
    pub r: f64,
    /// Merge height for clustering trees, 0 elsewhere.
    pub height: f64,
    /// (space node index, op) equivalence tag on default trees.
    pub tag: Option<(usize, usize)>,
}

impl TreeNode {
    fn fresh() -> Self {
        TreeNode {
            parent: None,
            children: Vec::new(),
            leaf_arch: None,
            visits: 0,
            c: INIT_REWARD,
            r: f64::INFINITY,
            height: 0.0,
            tag: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// A rooted search tree whose leaves biject onto architecture indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchTree {
    nodes: Vec<TreeNode>,
    root: usize,
    /// Leaf node id per architecture index.
    arch_to_leaf: Vec<usize>,
    /// Node ids per equivalence tag, for the regularizer.
    tag_index: HashMap<(usize, usize), Vec<usize>>,
}

impl SearchTree {
    pub fn root(&self) -> usize {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn node_mut(&mut self, id: usize) -> &mut TreeNode {
        &mut self.nodes[id]
    }

    /// Number of architectures (= leaves).
    pub fn num_archs(&self) -> usize {
        self.arch_to_leaf.len()
    }

    pub fn leaf_for_arch(&self, arch_index: usize) -> usize {
        self.arch_to_leaf[arch_index]
    }

    /// Node ids from the root down to `leaf` inclusive.
    pub fn path_from_root(&self, leaf: usize) -> Vec<usize> {
        let mut path = vec![leaf];
        let mut cur = leaf;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    pub fn tagged_nodes(&self, tag: (usize, usize)) -> &[usize] {
        self.tag_index.get(&tag).map_or(&[], |v| v.as_slice())
    }

    /// Resets visit counts and rewards to their initial values.
    pub fn reset_stats(&mut self) {
        for node in &mut self.nodes {
            node.visits = 0;
            node.c = INIT_REWARD;
            node.r = f64::INFINITY;
        }
    }

    /// Architecture indices under a node, in leaf order.
    pub fn leaf_set(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            let node = &self.nodes[cur];
            if let Some(a) = node.leaf_arch {
                out.push(a);
            }
            for &c in node.children.iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    /// Node ids in preorder (parent before children, children in order).
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(cur) = stack.pop() {
            out.push(cur);
            for &c in self.nodes[cur].children.iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    /// Checks structural invariants: parent/child link consistency, internal
    /// arity >= 2, the leaf-architecture bijection, and visit monotonicity
    /// n(parent) >= sum n(children).
    pub fn validate(&self) -> Result<(), HierarchyError> {
        if self.nodes[self.root].parent.is_some() {
            return Err(HierarchyError::Invalid("root has a parent".into()));
        }
        let mut seen_arch = vec![false; self.arch_to_leaf.len()];
        let mut visited = 0usize;
        for id in self.preorder() {
            visited += 1;
            let node = &self.nodes[id];
            match (&node.children.is_empty(), node.leaf_arch) {
                (true, Some(a)) => {
                    if a >= seen_arch.len() || seen_arch[a] {
                        return Err(HierarchyError::Invalid(format!(
                            "leaf architecture {a} out of range or duplicated"
                        )));
                    }
                    if self.arch_to_leaf[a] != id {
                        return Err(HierarchyError::Invalid(format!(
                            "arch_to_leaf[{a}] does not point at its leaf"
                        )));
                    }
                    seen_arch[a] = true;
                }
                (true, None) => {
                    return Err(HierarchyError::Invalid(format!("leaf {id} has no arch")))
                }
                (false, Some(_)) => {
                    return Err(HierarchyError::Invalid(format!(
                        "internal node {id} carries an arch"
                    )))
                }
                (false, None) => {
                    if node.children.len() < 2 {
                        return Err(HierarchyError::Invalid(format!(
                            "internal node {id} has fewer than 2 children"
                        )));
                    }
                    let child_visits: u64 =
                        node.children.iter().map(|&c| self.nodes[c].visits).sum();
                    if node.visits < child_visits {
                        return Err(HierarchyError::Invalid(format!(
                            "visits at {id} below its children's total"
                        )));
                    }
                    for &c in &node.children {
                        if self.nodes[c].parent != Some(id) {
                            return Err(HierarchyError::Invalid(format!(
                                "child {c} does not point back at {id}"
                            )));
                        }
                    }
                }
            }
        }
        if visited != self.nodes.len() {
            return Err(HierarchyError::Invalid(
                "unreachable nodes present".into(),
            ));
        }
        if !seen_arch.iter().all(|&s| s) {
            return Err(HierarchyError::Invalid(
                "some architecture has no leaf".into(),
            ));
        }
        Ok(())
    }

    /// Structural equality ignoring statistics: shape, leaf archs, heights.
    pub fn same_structure(&self, other: &SearchTree) -> bool {
        fn eq(a: &SearchTree, ai: usize, b: &SearchTree, bi: usize) -> bool {
            let (na, nb) = (&a.nodes[ai], &b.nodes[bi]);
            if na.leaf_arch != nb.leaf_arch
                || na.children.len() != nb.children.len()
                || na.height != nb.height
            {
                return false;
            }
            na.children
                .iter()
                .zip(&nb.children)
                .all(|(&ca, &cb)| eq(a, ca, b, cb))
        }
        self.num_archs() == other.num_archs() && eq(self, self.root, other, other.root)
    }

    fn from_parts(nodes: Vec<TreeNode>, root: usize, num_archs: usize) -> SearchTree {
        let mut arch_to_leaf = vec![usize::MAX; num_archs];
        let mut tag_index: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (id, node) in nodes.iter().enumerate() {
            if let Some(a) = node.leaf_arch {
                arch_to_leaf[a] = id;
            }
            if let Some(tag) = node.tag {
                tag_index.entry(tag).or_default().push(id);
            }
        }
        SearchTree {
            nodes,
            root,
            arch_to_leaf,
            tag_index,
        }
    }

    /// Assembles the binary tree described by a merge sequence.
    pub fn from_merges(n: usize, merges: &[Merge]) -> SearchTree {
        assert_eq!(merges.len(), n - 1, "a binary tree needs n-1 merges");
        let mut nodes: Vec<TreeNode> = (0..n)
            .map(|i| {
                let mut leaf = TreeNode::fresh();
                leaf.leaf_arch = Some(i);
                leaf
            })
            .collect();
        for merge in merges {
            let id = nodes.len();
            let mut node = TreeNode::fresh();
            node.children = vec![merge.a, merge.b];
            node.height = merge.height;
            nodes.push(node);
            nodes[merge.a].parent = Some(id);
            nodes[merge.b].parent = Some(id);
        }
        let root = nodes.len() - 1;
        SearchTree::from_parts(nodes, root, n)
    }

    /// Per-node statistics in preorder, for checkpoints and inspection.
    pub fn stats_json(&self) -> String {
        let stats: Vec<NodeStatsJson> = self
            .preorder()
            .into_iter()
            .map(|id| {
                let node = &self.nodes[id];
                NodeStatsJson {
                    arch: node.leaf_arch,
                    visits: node.visits,
                    c: node.c,
                    r: node.r.is_finite().then_some(node.r),
                    height: node.height,
                }
            })
            .collect();
        serde_json::to_string_pretty(&StatsFile { nodes: stats })
            .expect("stats serialization cannot fail")
    }

    /// Restores statistics from a sidecar produced on a tree of the same shape.
    pub fn apply_stats_json(&mut self, text: &str) -> Result<(), HierarchyError> {
        let file: StatsFile = serde_json::from_str(text)
            .map_err(|e| HierarchyError::Parse(format!("malformed stats JSON: {e}")))?;
        let order = self.preorder();
        if file.nodes.len() != order.len() {
            return Err(HierarchyError::Parse(format!(
                "{} stats entries for {} nodes",
                file.nodes.len(),
                order.len()
            )));
        }
        for (id, stats) in order.iter().zip(&file.nodes) {
            if self.nodes[*id].leaf_arch != stats.arch {
                return Err(HierarchyError::Parse(
                    "stats sidecar does not match tree shape".into(),
                ));
            }
        }
        for (id, stats) in order.into_iter().zip(file.nodes) {
            let node = &mut self.nodes[id];
            node.visits = stats.visits;
            node.c = stats.c;
            node.r = stats.r.unwrap_or(f64::INFINITY);
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct NodeStatsJson {
    arch: Option<usize>,
    visits: u64,
    c: f64,
    /// None encodes the +inf unvisited sentinel.
    r: Option<f64>,
    height: f64,
}

#[derive(Serialize, Deserialize)]
struct StatsFile {
    nodes: Vec<NodeStatsJson>,
}

/// Runs agglomerative clustering, returning the merge sequence.
///
/// Closest-pair selection is global per step, ties broken by the smallest
/// (id, id) cluster pair. Inter-cluster distances follow the Lance-Williams
/// recurrence; nearest-neighbor candidates per slot avoid the full O(n^3)
/// rescan on typical inputs.
pub fn agglomerate(d: &DistanceMatrix, linkage: Linkage) -> Vec<Merge> {
    let n = d.n();
    let mut dist = d.condensed().to_vec();
    let offset = |i: usize, j: usize| -> usize {
        debug_assert!(i < j);
        i * n - i * (i + 1) / 2 + (j - i - 1)
    };

    let mut active: Vec<bool> = vec![true; n];
    let mut size: Vec<f64> = vec![1.0; n];
    let mut id: Vec<usize> = (0..n).collect();

    // Candidate per slot i: best (distance, tie key, target slot) over
    // active j > i. The tie key is the sorted cluster-id pair.
    type Cand = (f64, (usize, usize), usize);
    let better = |a: &Cand, b: &Cand| -> bool { (a.0, a.1) < (b.0, b.1) };
    let mut nn: Vec<Option<Cand>> = vec![None; n];

    let key = |ida: usize, idb: usize| -> (usize, usize) {
        if ida < idb {
            (ida, idb)
        } else {
            (idb, ida)
        }
    };

    let recompute = |i: usize, dist: &Vec<f64>, active: &Vec<bool>, id: &Vec<usize>| -> Option<Cand> {
        let mut best: Option<Cand> = None;
        for j in (i + 1)..n {
            if !active[j] {
                continue;
            }
            let cand = (dist[offset(i, j)], key(id[i], id[j]), j);
            if best.as_ref().is_none_or(|b| better(&cand, b)) {
                best = Some(cand);
            }
        }
        best
    };

    for i in 0..n {
        nn[i] = recompute(i, &dist, &active, &id);
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..(n - 1) {
        let mut best: Option<(Cand, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            if let Some(c) = nn[i] {
                if best.as_ref().is_none_or(|(b, _)| better(&c, b)) {
                    best = Some((c, i));
                }
            }
        }
        let ((height, ids, sj), si) = best.expect("at least two active clusters");
        merges.push(Merge {
            a: ids.0,
            b: ids.1,
            height,
        });

        // Merge sj into si under the Lance-Williams recurrence.
        let dij = dist[offset(si, sj)];
        let (ni, nj) = (size[si], size[sj]);
        for k in 0..n {
            if !active[k] || k == si || k == sj {
                continue;
            }
            let dik = dist[offset(si.min(k), si.max(k))];
            let djk = dist[offset(sj.min(k), sj.max(k))];
            let nk = size[k];
            let updated = match linkage {
                Linkage::Single => 0.5 * dik + 0.5 * djk - 0.5 * (dik - djk).abs(),
                Linkage::Complete => 0.5 * dik + 0.5 * djk + 0.5 * (dik - djk).abs(),
                Linkage::Average => (ni * dik + nj * djk) / (ni + nj),
                Linkage::Ward => {
                    let total = ni + nj + nk;
                    ((ni + nk) * dik + (nj + nk) * djk - nk * dij) / total
                }
            };
            dist[offset(si.min(k), si.max(k))] = updated;
        }
        size[si] = ni + nj;
        id[si] = n + step;
        active[sj] = false;

        // Candidates referencing the merged slots are stale; others can only
        // be beaten by the updated (k, si) distance, which single linkage may
        // have shrunk.
        for k in 0..si {
            if !active[k] {
                continue;
            }
            match nn[k] {
                Some((_, _, t)) if t == si || t == sj => {
                    nn[k] = recompute(k, &dist, &active, &id);
                }
                _ => {
                    let cand = (dist[offset(k, si)], key(id[k], id[si]), si);
                    if nn[k].as_ref().is_none_or(|b| better(&cand, b)) {
                        nn[k] = Some(cand);
                    }
                }
            }
        }
        for k in (si + 1)..n {
            if !active[k] || k == sj {
                continue;
            }
            if let Some((_, _, t)) = nn[k] {
                if t == sj {
                    nn[k] = recompute(k, &dist, &active, &id);
                }
            }
        }
        nn[si] = recompute(si, &dist, &active, &id);
    }
    merges
}

/// Binary tree from agglomerative clustering of a distance matrix.
///
/// Matrix validity (symmetry, zero diagonal, nonnegative finite entries) is
/// enforced by the DistanceMatrix type, so this cannot fail.
pub fn agglomerative(d: &DistanceMatrix, linkage: Linkage) -> SearchTree {
    SearchTree::from_merges(d.n(), &agglomerate(d, linkage))
}

/// Layer-order tree: level t branches on space node t in label order. Leaves
/// land in canonical enumeration order; every non-root node gets a
/// (level, op) equivalence tag.
pub fn default_tree(space: &SearchSpace) -> Result<SearchTree, HierarchyError> {
    if space.constraint.is_some() {
        return Err(HierarchyError::ConstraintUnsupported);
    }
    let levels = space.num_nodes();
    let mut stride = vec![1usize; levels];
    for l in (0..levels - 1).rev() {
        stride[l] = stride[l + 1] * space.arity(l + 1);
    }
    let total = stride[0] * space.arity(0);
    if total as u128 > DEFAULT_ENUMERATION_CAP as u128 {
        return Err(SpaceError::CapacityExceeded {
            cardinality: total as u128,
            cap: DEFAULT_ENUMERATION_CAP,
        }
        .into());
    }

    let mut nodes = vec![TreeNode::fresh()];
    let mut frontier = std::collections::VecDeque::new();
    frontier.push_back((0usize, 0usize, 0usize));
    while let Some((parent, level, base)) = frontier.pop_front() {
        for op in 0..space.arity(level) {
            let child = nodes.len();
            let mut node = TreeNode::fresh();
            node.parent = Some(parent);
            node.tag = Some((level, op));
            let index = base + op * stride[level];
            if level + 1 == levels {
                node.leaf_arch = Some(index);
            } else {
                frontier.push_back((child, level + 1, index));
            }
            nodes.push(node);
            nodes[parent].children.push(child);
        }
    }
    Ok(SearchTree::from_parts(nodes, 0, total))
}

/// Baseline tree: average-linkage clustering of a seeded random matrix.
pub fn random_tree(space: &SearchSpace, seed: u64) -> Result<SearchTree, HierarchyError> {
    let en = enumerate(space, DEFAULT_ENUMERATION_CAP)?;
    let d = random_matrix(en.len(), seed)?;
    Ok(agglomerative(&d, Linkage::Average))
}

/// Ablation tree: recursive bipartition by ground-truth accuracy, the top
/// half (rounded up) forming the first child at every split.
pub fn accuracy_partition_tree(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
) -> Result<SearchTree, HierarchyError> {
    let en = enumerate(space, DEFAULT_ENUMERATION_CAP)?;
    let mut order: Vec<(usize, f64)> = Vec::with_capacity(en.len());
    for (i, arch) in en.iter().enumerate() {
        order.push((i, evaluator.clean_accuracy(arch)?));
    }
    order.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("accuracies are finite")
            .then(a.0.cmp(&b.0))
    });
    let sorted: Vec<usize> = order.into_iter().map(|(i, _)| i).collect();

    let mut nodes: Vec<TreeNode> = Vec::new();
    // Work stack of (sorted slice bounds, parent). Children are created in
    // good-then-bad order because the bad half is pushed first.
    nodes.push(TreeNode::fresh());
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();
    let root_split = sorted.len().div_ceil(2);
    if sorted.len() == 1 {
        nodes[0].leaf_arch = Some(sorted[0]);
    } else {
        stack.push((root_split, sorted.len(), 0));
        stack.push((0, root_split, 0));
    }
    while let Some((lo, hi, parent)) = stack.pop() {
        let child = nodes.len();
        let mut node = TreeNode::fresh();
        node.parent = Some(parent);
        if hi - lo == 1 {
            node.leaf_arch = Some(sorted[lo]);
            nodes.push(node);
        } else {
            nodes.push(node);
            let mid = lo + (hi - lo).div_ceil(2);
            stack.push((mid, hi, child));
            stack.push((lo, mid, child));
        }
        nodes[parent].children.push(child);
    }
    Ok(SearchTree::from_parts(nodes, 0, sorted.len()))
}

/// Parenthesized export: leaves print their architecture index, internal
/// nodes their merge height after a colon. Round-trips through [`parse_tree`].
pub fn export_tree(tree: &SearchTree) -> String {
    let mut out = String::new();
    // (node, next child position); leaves are emitted directly.
    let mut stack: Vec<(usize, usize)> = vec![(tree.root(), 0)];
    while let Some((id, pos)) = stack.pop() {
        let node = tree.node(id);
        if let Some(a) = node.leaf_arch {
            out.push_str(&a.to_string());
            continue;
        }
        if pos == 0 {
            out.push('(');
        }
        if pos < node.children.len() {
            if pos > 0 {
                out.push(',');
            }
            stack.push((id, pos + 1));
            stack.push((node.children[pos], 0));
        } else {
            out.push_str(&format!("):{}", node.height));
        }
    }
    out.push(';');
    out
}

/// Parses the [`export_tree`] format back into a tree with fresh statistics.
pub fn parse_tree(text: &str) -> Result<SearchTree, HierarchyError> {
    let bytes = text.as_bytes();
    let mut pos = 0usize;
    let err = |pos: usize, what: &str| HierarchyError::Parse(format!("{what} at byte {pos}"));

    let mut nodes: Vec<TreeNode> = Vec::new();
    // Stack of in-progress internal nodes as child-id lists.
    let mut frames: Vec<Vec<usize>> = Vec::new();
    let mut last: Option<usize> = None;
    loop {
        match bytes.get(pos) {
            Some(b'(') => {
                frames.push(Vec::new());
                pos += 1;
            }
            Some(b'0'..=b'9') => {
                let start = pos;
                while matches!(bytes.get(pos), Some(b'0'..=b'9')) {
                    pos += 1;
                }
                let label: usize = text[start..pos]
                    .parse()
                    .map_err(|_| err(start, "bad leaf label"))?;
                let mut leaf = TreeNode::fresh();
                leaf.leaf_arch = Some(label);
                nodes.push(leaf);
                last = Some(nodes.len() - 1);
            }
            Some(b',') => {
                let child = last.take().ok_or_else(|| err(pos, "dangling comma"))?;
                frames
                    .last_mut()
                    .ok_or_else(|| err(pos, "comma outside group"))?
                    .push(child);
                pos += 1;
            }
            Some(b')') => {
                let child = last.take().ok_or_else(|| err(pos, "empty group"))?;
                let mut children = frames.pop().ok_or_else(|| err(pos, "unmatched ')'"))?;
                children.push(child);
                if children.len() < 2 {
                    return Err(err(pos, "internal node needs 2+ children"));
                }
                pos += 1;
                let mut height = 0.0;
                if bytes.get(pos) == Some(&b':') {
                    pos += 1;
                    let start = pos;
                    while matches!(
                        bytes.get(pos),
                        Some(b'0'..=b'9' | b'.' | b'-' | b'+' | b'e' | b'E')
                    ) {
                        pos += 1;
                    }
                    height = text[start..pos]
                        .parse()
                        .map_err(|_| err(start, "bad height"))?;
                }
                let id = nodes.len();
                let mut node = TreeNode::fresh();
                node.height = height;
                node.children = children.clone();
                nodes.push(node);
                for c in children {
                    nodes[c].parent = Some(id);
                }
                last = Some(id);
            }
            Some(b';') => {
                pos += 1;
                break;
            }
            Some(_) => return Err(err(pos, "unexpected byte")),
            None => return Err(err(pos, "missing ';'")),
        }
    }
    if pos != bytes.len() || !frames.is_empty() {
        return Err(err(pos, "trailing content"));
    }
    let root = last.ok_or_else(|| err(pos, "empty tree"))?;

    let num_archs = nodes.iter().filter(|n| n.leaf_arch.is_some()).count();
    if nodes
        .iter()
        .filter_map(|n| n.leaf_arch)
        .any(|a| a >= num_archs)
    {
        return Err(HierarchyError::Parse(
            "leaf labels are not 0..n-1".into(),
        ));
    }
    let tree = SearchTree::from_parts(nodes, root, num_archs);
    tree.validate()?;
    Ok(tree)
}
