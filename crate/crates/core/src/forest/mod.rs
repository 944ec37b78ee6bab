//! ε-DP random forests: data-independent random structure, Laplace-noised
//! integer leaf counts, soft voting.

mod budget;
mod gaussian;
mod laplace;
mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{BinaryDataset, FeatureLayout, OneHotGroup};
use crate::error::{Error, Result};
use crate::rng::rng_from;

pub use budget::PrivacyBudget;
pub use gaussian::{compose_budget, gaussian_budget_for_total, gaussian_sigma, Composition, GaussianBudget};
pub use laplace::{int_part, laplace_int_noise};
pub use tree::{build_random_tree, DecisionTree, LeafPredicate, TreeNode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    True,
    Noisy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub num_trees: usize,
    pub depth: usize,
    pub epsilon: PrivacyBudget,
}

/// Flat indexing of (tree, leaf, class) cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellLayout {
    offsets: Vec<usize>,
    num_classes: usize,
}

impl CellLayout {
    #[inline]
    pub fn index(&self, tree: usize, leaf: usize, class: usize) -> usize {
        self.offsets[tree] + leaf * self.num_classes + class
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().expect("offsets has a sentinel")
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_trees(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn tree_range(&self, tree: usize) -> std::ops::Range<usize> {
        self.offsets[tree]..self.offsets[tree + 1]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    trees: Vec<DecisionTree>,
    depth: usize,
    epsilon_total: PrivacyBudget,
    num_classes: usize,
    layout: FeatureLayout,
    n_train_true: Option<usize>,
}

impl Forest {
    pub fn new(
        trees: Vec<DecisionTree>,
        depth: usize,
        epsilon_total: PrivacyBudget,
        num_classes: usize,
        layout: FeatureLayout,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::param("a forest needs at least one tree"));
        }
        if num_classes < 2 {
            return Err(Error::param("a forest needs at least two classes"));
        }
        Ok(Forest {
            trees,
            depth,
            epsilon_total,
            num_classes,
            layout,
            n_train_true: None,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_features(&self) -> usize {
        self.layout.num_features()
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn epsilon_total(&self) -> PrivacyBudget {
        self.epsilon_total
    }

    /// ε_v = ε/|T|.
    pub fn epsilon_per_leaf(&self) -> PrivacyBudget {
        self.epsilon_total.split(self.trees.len()).expect("forest has trees")
    }

    pub fn n_train_true(&self) -> Option<usize> {
        self.n_train_true
    }

    pub fn has_true_counts(&self) -> bool {
        self.trees
            .iter()
            .all(|t| (0..t.num_leaves()).all(|v| t.true_counts(v).is_some()))
    }

    pub fn cell_layout(&self) -> CellLayout {
        let mut offsets = vec![0];
        for t in &self.trees {
            offsets.push(offsets.last().unwrap() + t.num_leaves() * self.num_classes);
        }
        CellLayout {
            offsets,
            num_classes: self.num_classes,
        }
    }

    pub fn noisy_counts_flat(&self) -> Vec<i64> {
        self.trees
            .iter()
            .flat_map(|t| (0..t.num_leaves()).flat_map(move |v| t.noisy_counts(v).iter().copied()))
            .collect()
    }

    pub fn true_counts_flat(&self) -> Option<Vec<u64>> {
        let mut out = Vec::new();
        for t in &self.trees {
            for v in 0..t.num_leaves() {
                out.extend_from_slice(t.true_counts(v)?);
            }
        }
        Some(out)
    }

    /// The artifact an adversary sees: structure and noisy counts only.
    pub fn attacker_view(&self) -> Forest {
        let mut f = self.clone();
        for t in &mut f.trees {
            t.strip_true_counts();
        }
        f.n_train_true = None;
        f
    }

    /// Replaces noisy counts in cell order. Used to build controlled problems.
    pub fn set_noisy_counts_flat(&mut self, counts: &[i64]) -> Result<()> {
        let cells = self.cell_layout();
        if counts.len() != cells.len() {
            return Err(Error::DimensionMismatch(format!("{} counts for {} cells", counts.len(), cells.len())));
        }
        let c = self.num_classes;
        for (t, tree) in self.trees.iter_mut().enumerate() {
            for v in 0..tree.num_leaves() {
                let i = cells.index(t, v, 0);
                tree.set_noisy_counts(v, counts[i..i + c].to_vec());
            }
        }
        Ok(())
    }

    /// Soft voting: each tree contributes the normalized class frequencies of
    /// the routed leaf (uniform if they are all ≤ 0); ties go to the lowest
    /// class id.
    pub fn predict_soft_voting(&self, row: &[u8], mode: CountMode) -> Result<(usize, Vec<f64>)> {
        if row.len() != self.num_features() {
            return Err(Error::DimensionMismatch(format!(
                "row has {} attributes, forest expects {}",
                row.len(),
                self.num_features()
            )));
        }
        let c = self.num_classes;
        let mut probs = vec![0.0; c];
        for t in &self.trees {
            let v = t.route(row);
            let counts: Vec<f64> = match mode {
                CountMode::Noisy => t.noisy_counts(v).iter().map(|&x| x as f64).collect(),
                CountMode::True => t
                    .true_counts(v)
                    .ok_or_else(|| Error::param("true counts are not available in this forest"))?
                    .iter()
                    .map(|&x| x as f64)
                    .collect(),
            };
            // negative noisy counts carry no class frequency
            let clipped: Vec<f64> = counts.iter().map(|&x| x.max(0.0)).collect();
            let total: f64 = clipped.iter().sum();
            for k in 0..c {
                probs[k] += if total > 0.0 { clipped[k] / total } else { 1.0 / c as f64 };
            }
        }
        let t = self.trees.len() as f64;
        probs.iter_mut().for_each(|p| *p /= t);
        let mut best = 0;
        for k in 1..c {
            if probs[k] > probs[best] {
                best = k;
            }
        }
        Ok((best, probs))
    }

    pub fn accuracy(&self, dataset: &BinaryDataset, mode: CountMode) -> Result<f64> {
        if dataset.n() == 0 {
            return Err(Error::param("accuracy of an empty dataset is undefined"));
        }
        let mut hits = 0usize;
        for (row, &label) in dataset.rows().iter().zip(dataset.labels()) {
            if self.predict_soft_voting(row, mode)?.0 == label {
                hits += 1;
            }
        }
        Ok(hits as f64 / dataset.n() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ForestRecord::from(self))?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ForestRecord::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<ForestRecord>(s)?.try_into()
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

#[derive(Serialize, Deserialize)]
struct TreeRecord {
    nodes: Vec<TreeNode>,
}

#[derive(Serialize, Deserialize)]
struct ForestRecord {
    num_trees: usize,
    depth: usize,
    epsilon_total: PrivacyBudget,
    epsilon_per_leaf: PrivacyBudget,
    num_classes: usize,
    num_features: usize,
    #[serde(default)]
    groups: Vec<OneHotGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_train_true: Option<usize>,
    trees: Vec<TreeRecord>,
}

impl From<&Forest> for ForestRecord {
    fn from(f: &Forest) -> Self {
        ForestRecord {
            num_trees: f.num_trees(),
            depth: f.depth,
            epsilon_total: f.epsilon_total,
            epsilon_per_leaf: f.epsilon_per_leaf(),
            num_classes: f.num_classes,
            num_features: f.num_features(),
            groups: f.layout.groups().to_vec(),
            n_train_true: f.n_train_true,
            trees: f.trees.iter().map(|t| TreeRecord { nodes: t.nodes().to_vec() }).collect(),
        }
    }
}

impl TryFrom<ForestRecord> for Forest {
    type Error = Error;

    fn try_from(r: ForestRecord) -> Result<Self> {
        if r.trees.len() != r.num_trees {
            return Err(Error::param(format!("num_trees = {} but {} trees", r.num_trees, r.trees.len())));
        }
        let layout = FeatureLayout::new(r.num_features, r.groups)?;
        let trees = r
            .trees
            .into_iter()
            .map(|t| DecisionTree::from_nodes(t.nodes, r.num_features, r.num_classes))
            .collect::<Result<Vec<_>>>()?;
        let mut f = Forest::new(trees, r.depth, r.epsilon_total, r.num_classes, layout)?;
        f.n_train_true = r.n_train_true;
        Ok(f)
    }
}

impl Serialize for Forest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ForestRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Forest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ForestRecord::deserialize(d)?.try_into().map_err(serde::de::Error::custom)
    }
}

/// Trains an ε-DP forest. Tree `t` draws its structure from stream
/// (seed, t, 0) and its noise from stream (seed, t, 1).
pub fn train_dp_forest(dataset: &BinaryDataset, params: &ForestParams, seed: u64) -> Result<Forest> {
    if params.num_trees == 0 {
        return Err(Error::param("num_trees must be at least 1"));
    }
    let epsilon_v = params.epsilon.split(params.num_trees)?.finite_f64();
    let mut trees = Vec::with_capacity(params.num_trees);
    for t in 0..params.num_trees as u64 {
        let mut tree = build_random_tree(
            dataset.layout(),
            dataset.num_classes(),
            params.depth,
            &mut rng_from(seed, &[t, 0]),
        )?;
        tree.compute_true_counts(dataset);
        if let Some(e) = epsilon_v {
            let mut rng = rng_from(seed, &[t, 1]);
            for v in 0..tree.num_leaves() {
                let noisy = tree
                    .noisy_counts(v)
                    .iter()
                    .map(|&n| Ok(n + laplace_int_noise(e, &mut rng)?))
                    .collect::<Result<Vec<_>>>()?;
                tree.set_noisy_counts(v, noisy);
            }
        }
        trees.push(tree);
    }
    let mut forest = Forest::new(
        trees,
        params.depth,
        params.epsilon,
        dataset.num_classes(),
        dataset.layout().clone(),
    )?;
    forest.n_train_true = Some(dataset.n());
    Ok(forest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticSpec};

    fn data(n: usize) -> BinaryDataset {
        generate_synthetic(&SyntheticSpec {
            m_features: 6,
            n_rows: n,
            class_balance: 0.5,
            group_layout: vec![3],
            seed: 5,
            label_rule: Default::default(),
        })
        .unwrap()
    }

    fn params(eps: &str) -> ForestParams {
        ForestParams {
            num_trees: 4,
            depth: 3,
            epsilon: eps.parse().unwrap(),
        }
    }

    #[test]
    fn infinite_budget_publishes_true_counts() {
        let f = train_dp_forest(&data(40), &params("inf"), 1).unwrap();
        let t: Vec<i64> = f.true_counts_flat().unwrap().iter().map(|&x| x as i64).collect();
        assert_eq!(t, f.noisy_counts_flat());
    }

    #[test]
    fn per_tree_totals_equal_n() {
        let f = train_dp_forest(&data(37), &params("1"), 2).unwrap();
        let t = f.true_counts_flat().unwrap();
        let cells = f.cell_layout();
        for tree in 0..f.num_trees() {
            assert_eq!(t[cells.tree_range(tree)].iter().sum::<u64>(), 37);
        }
    }

    #[test]
    fn budget_split() {
        let f = train_dp_forest(
            &data(10),
            &ForestParams {
                num_trees: 10,
                depth: 2,
                epsilon: "10".parse().unwrap(),
            },
            0,
        )
        .unwrap();
        assert_eq!(f.epsilon_per_leaf().as_f64(), 1.0);
        assert_eq!(f.epsilon_per_leaf().times(10), f.epsilon_total());
    }

    #[test]
    fn json_round_trip_and_stripping() {
        let f = train_dp_forest(&data(20), &params("5"), 3).unwrap();
        let back = Forest::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(back, f);
        let view = f.attacker_view();
        let s = view.to_json().unwrap();
        assert!(!s.contains("true_counts"));
        assert!(!s.contains("n_train_true"));
        assert_eq!(Forest::from_json(&s).unwrap().noisy_counts_flat(), f.noisy_counts_flat());
    }

    #[test]
    fn soft_voting_rules() {
        let leaf = |n: Vec<i64>| TreeNode::Leaf { true_counts: None, noisy_counts: n };
        let one = |counts: Vec<i64>| DecisionTree::from_nodes(vec![leaf(counts)], 1, 2).unwrap();
        let layout = FeatureLayout::free(1);
        let f = Forest::new(vec![one(vec![3, 1])], 1, PrivacyBudget::Infinite, 2, layout.clone()).unwrap();
        assert_eq!(f.predict_soft_voting(&[0], CountMode::Noisy).unwrap(), (0, vec![0.75, 0.25]));

        let f = Forest::new(vec![one(vec![1, 0]), one(vec![0, 1])], 1, PrivacyBudget::Infinite, 2, layout.clone()).unwrap();
        assert_eq!(f.predict_soft_voting(&[1], CountMode::Noisy).unwrap(), (0, vec![0.5, 0.5]));

        let f = Forest::new(vec![one(vec![-2, -1])], 1, PrivacyBudget::Infinite, 2, layout).unwrap();
        assert_eq!(f.predict_soft_voting(&[1], CountMode::Noisy).unwrap().1, vec![0.5, 0.5]);
        assert!(f.predict_soft_voting(&[1], CountMode::True).is_err());
    }
}
