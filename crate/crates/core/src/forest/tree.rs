use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::dataset::{BinaryDataset, FeatureLayout};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `attribute == 1` go left.
    Internal {
        attribute: usize,
        left: usize,
        right: usize,
    },
    Leaf {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        true_counts: Option<Vec<u64>>,
        noisy_counts: Vec<i64>,
    },
}

/// Attributes forced to 1 (`positive`) and to 0 (`negative`) on a root path.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LeafPredicate {
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

impl LeafPredicate {
    pub fn matches(&self, row: &[u8]) -> bool {
        self.positive.iter().all(|&a| row[a] == 1) && self.negative.iter().all(|&a| row[a] == 0)
    }
}

/// A binary decision tree stored as a node array with the root at index 0.
/// Leaves are numbered in left-first preorder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    leaf_nodes: Vec<usize>,
    leaf_of_node: Vec<usize>,
    predicates: Vec<LeafPredicate>,
}

const NOT_LEAF: usize = usize::MAX;

impl DecisionTree {
    /// Validates a node array and indexes its leaves.
    pub fn from_nodes(nodes: Vec<TreeNode>, num_features: usize, num_classes: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::param("tree has no nodes"));
        }
        let mut seen = vec![false; nodes.len()];
        let mut leaf_nodes = Vec::new();
        let mut leaf_of_node = vec![NOT_LEAF; nodes.len()];
        let mut predicates = Vec::new();
        let mut stack = vec![(0usize, LeafPredicate::default())];
        while let Some((id, pred)) = stack.pop() {
            if id >= nodes.len() || seen[id] {
                return Err(Error::param(format!("node {id} is out of range or has two parents")));
            }
            seen[id] = true;
            match &nodes[id] {
                TreeNode::Internal { attribute, left, right } => {
                    let a = *attribute;
                    if a >= num_features {
                        return Err(Error::param(format!("node {id} splits on attribute {a} >= {num_features}")));
                    }
                    if left == right {
                        return Err(Error::param(format!("node {id} has identical children")));
                    }
                    if pred.positive.contains(&a) || pred.negative.contains(&a) {
                        return Err(Error::param(format!("attribute {a} repeats on the path to node {id}")));
                    }
                    let mut r = pred.clone();
                    r.negative.push(a);
                    let mut l = pred;
                    l.positive.push(a);
                    // right is pushed first so the left subtree is numbered first
                    stack.push((*right, r));
                    stack.push((*left, l));
                }
                TreeNode::Leaf { true_counts, noisy_counts } => {
                    if noisy_counts.len() != num_classes
                        || true_counts.as_ref().is_some_and(|t| t.len() != num_classes)
                    {
                        return Err(Error::param(format!("leaf node {id} does not hold {num_classes} counts")));
                    }
                    leaf_of_node[id] = leaf_nodes.len();
                    leaf_nodes.push(id);
                    predicates.push(pred);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::param("tree has unreachable nodes"));
        }
        Ok(DecisionTree {
            nodes,
            leaf_nodes,
            leaf_of_node,
            predicates,
        })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn num_leaves(&self) -> usize {
        self.leaf_nodes.len()
    }

    pub fn leaf_predicate(&self, leaf: usize) -> &LeafPredicate {
        &self.predicates[leaf]
    }

    pub fn leaf_predicates(&self) -> &[LeafPredicate] {
        &self.predicates
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        self.predicates
            .iter()
            .map(|p| p.positive.len() + p.negative.len())
            .max()
            .unwrap_or(0)
    }

    pub fn route(&self, row: &[u8]) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                TreeNode::Internal { attribute, left, right } => {
                    id = if row[*attribute] == 1 { *left } else { *right };
                }
                TreeNode::Leaf { .. } => return self.leaf_of_node[id],
            }
        }
    }

    fn leaf_mut(&mut self, leaf: usize) -> (&mut Option<Vec<u64>>, &mut Vec<i64>) {
        match &mut self.nodes[self.leaf_nodes[leaf]] {
            TreeNode::Leaf { true_counts, noisy_counts } => (true_counts, noisy_counts),
            TreeNode::Internal { .. } => unreachable!("leaf index points at an internal node"),
        }
    }

    fn leaf(&self, leaf: usize) -> (&Option<Vec<u64>>, &Vec<i64>) {
        match &self.nodes[self.leaf_nodes[leaf]] {
            TreeNode::Leaf { true_counts, noisy_counts } => (true_counts, noisy_counts),
            TreeNode::Internal { .. } => unreachable!("leaf index points at an internal node"),
        }
    }

    pub fn true_counts(&self, leaf: usize) -> Option<&[u64]> {
        self.leaf(leaf).0.as_deref()
    }

    pub fn noisy_counts(&self, leaf: usize) -> &[i64] {
        self.leaf(leaf).1
    }

    pub fn set_noisy_counts(&mut self, leaf: usize, counts: Vec<i64>) {
        *self.leaf_mut(leaf).1 = counts;
    }

    /// Replaces the true counts with a tally of `dataset` and resets the
    /// noisy counts to the same values.
    pub fn compute_true_counts(&mut self, dataset: &BinaryDataset) {
        let c = dataset.num_classes();
        let mut tally = vec![vec![0u64; c]; self.num_leaves()];
        for (row, &label) in dataset.rows().iter().zip(dataset.labels()) {
            tally[self.route(row)][label] += 1;
        }
        for (leaf, counts) in tally.into_iter().enumerate() {
            let (t, n) = self.leaf_mut(leaf);
            *n = counts.iter().map(|&x| x as i64).collect();
            *t = Some(counts);
        }
    }

    pub fn strip_true_counts(&mut self) {
        for leaf in 0..self.num_leaves() {
            *self.leaf_mut(leaf).0 = None;
        }
    }
}

/// Per-attribute state along a root path, with one-hot implications applied.
#[derive(Clone)]
pub(crate) struct PathState<'a> {
    layout: &'a FeatureLayout,
    pub(crate) fixed: Vec<Option<bool>>,
}

impl<'a> PathState<'a> {
    pub(crate) fn new(layout: &'a FeatureLayout) -> Self {
        let mut s = PathState {
            layout,
            fixed: vec![None; layout.num_features()],
        };
        for g in layout.groups() {
            if g.len() == 1 {
                s.fixed[g.attribute_indices[0]] = Some(true);
            }
        }
        s
    }

    /// Fixes `a` to `value` and propagates group implications. Returns false
    /// (leaving the state partially updated) on contradiction.
    pub(crate) fn fix(&mut self, a: usize, value: bool) -> bool {
        match self.fixed[a] {
            Some(v) => return v == value,
            None => self.fixed[a] = Some(value),
        }
        let Some(g) = self.layout.group_of(a) else {
            return true;
        };
        let members = &self.layout.groups()[g].attribute_indices;
        if value {
            for &b in members {
                if b != a {
                    if self.fixed[b] == Some(true) {
                        return false;
                    }
                    self.fixed[b] = Some(false);
                }
            }
            true
        } else {
            if members.iter().any(|&b| self.fixed[b] == Some(true)) {
                return true;
            }
            let mut open = members.iter().filter(|&&b| self.fixed[b].is_none());
            match (open.next(), open.next()) {
                (None, _) => false,
                (Some(&only), None) => {
                    self.fixed[only] = Some(true);
                    true
                }
                _ => true,
            }
        }
    }
}

/// Builds a tree whose split attributes are drawn uniformly among the
/// attributes not yet determined on the path. Training data is not read.
/// Leaves start with zero counts.
pub fn build_random_tree<R: rand::Rng + ?Sized>(
    layout: &FeatureLayout,
    num_classes: usize,
    depth: usize,
    rng: &mut R,
) -> Result<DecisionTree> {
    if depth < 1 {
        return Err(Error::param("tree depth must be at least 1"));
    }
    let root = PathState::new(layout);
    if root.fixed.iter().all(Option::is_some) {
        return Err(Error::param("no attribute is eligible for a split"));
    }
    let mut nodes = Vec::new();
    grow(&mut nodes, root, depth, num_classes, rng);
    DecisionTree::from_nodes(nodes, layout.num_features(), num_classes)
}

fn grow<R: rand::Rng + ?Sized>(
    nodes: &mut Vec<TreeNode>,
    state: PathState<'_>,
    remaining: usize,
    num_classes: usize,
    rng: &mut R,
) -> usize {
    let id = nodes.len();
    let eligible: Vec<usize> = (0..state.fixed.len()).filter(|&a| state.fixed[a].is_none()).collect();
    if remaining == 0 || eligible.is_empty() {
        nodes.push(TreeNode::Leaf {
            true_counts: Some(vec![0; num_classes]),
            noisy_counts: vec![0; num_classes],
        });
        return id;
    }
    let a = eligible[rng.random_range(0..eligible.len())];
    nodes.push(TreeNode::Internal {
        attribute: a,
        left: 0,
        right: 0,
    });
    let mut l = state.clone();
    let mut r = state;
    let ok = l.fix(a, true) && r.fix(a, false);
    debug_assert!(ok, "an unfixed attribute admits both values");
    let left = grow(nodes, l, remaining - 1, num_classes, rng);
    let right = grow(nodes, r, remaining - 1, num_classes, rng);
    nodes[id] = TreeNode::Internal {
        attribute: a,
        left,
        right,
    };
    id
}
