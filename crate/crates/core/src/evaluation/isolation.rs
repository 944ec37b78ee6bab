use rand::seq::index::sample;
use rand::RngExt;

use crate::dataset::BinaryDataset;
use crate::rng::{rng_from, Rng};

pub const DEFAULT_NUM_ITREES: usize = 100;
pub const DEFAULT_SUBSAMPLE: usize = 256;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average path length of an unsuccessful search in a binary search tree
/// built on `n` points.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

enum INode {
    Split { attribute: usize, zero: usize, one: usize },
    Leaf { size: usize },
}

struct ITree {
    nodes: Vec<INode>,
}

impl ITree {
    fn grow(ds: &BinaryDataset, idx: Vec<usize>, height_limit: usize, rng: &mut Rng) -> Self {
        let mut t = ITree { nodes: Vec::new() };
        t.build(ds, idx, 0, height_limit, rng);
        t
    }

    fn build(&mut self, ds: &BinaryDataset, idx: Vec<usize>, depth: usize, limit: usize, rng: &mut Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(INode::Leaf { size: idx.len() });
        if depth >= limit || idx.len() <= 1 {
            return id;
        }
        // a feature is only usable if it is not constant on this node
        let candidates: Vec<usize> = (0..ds.m())
            .filter(|&a| {
                let first = ds.row(idx[0])[a];
                idx.iter().any(|&k| ds.row(k)[a] != first)
            })
            .collect();
        if candidates.is_empty() {
            return id;
        }
        let attribute = candidates[rng.random_range(0..candidates.len())];
        let (ones, zeros): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&k| ds.row(k)[attribute] == 1);
        let zero = self.build(ds, zeros, depth + 1, limit, rng);
        let one = self.build(ds, ones, depth + 1, limit, rng);
        self.nodes[id] = INode::Split { attribute, zero, one };
        id
    }

    fn path_length(&self, row: &[u8]) -> f64 {
        let mut node = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[node] {
                INode::Split { attribute, zero, one } => {
                    node = if row[attribute] == 1 { one } else { zero };
                    depth += 1.0;
                }
                INode::Leaf { size } => return depth + average_path_length(size),
            }
        }
    }
}

/// Isolation-forest anomaly score s(x) = 2^(−E[h(x)] / c(ψ)) for every row,
/// where ψ = min(subsample, N). Higher means more anomalous.
pub fn isolation_scores(dataset: &BinaryDataset, num_itrees: usize, subsample: usize, seed: u64) -> Vec<f64> {
    let n = dataset.n();
    if n == 0 || num_itrees == 0 {
        return vec![0.5; n];
    }
    let psi = subsample.clamp(1, n);
    let height_limit = (psi as f64).log2().ceil() as usize;
    let mut rng = rng_from(seed, &[0x6973_6f66]);
    let trees: Vec<ITree> = (0..num_itrees)
        .map(|_| {
            let idx = sample(&mut rng, n, psi).into_vec();
            ITree::grow(dataset, idx, height_limit, &mut rng)
        })
        .collect();
    let c = average_path_length(psi);
    dataset
        .rows()
        .iter()
        .map(|row| {
            let mean_h = trees.iter().map(|t| t.path_length(row)).sum::<f64>() / num_itrees as f64;
            if c > 0.0 {
                (-mean_h / c).exp2()
            } else {
                0.5
            }
        })
        .collect()
}

/// (inlier indices, outlier indices); outliers score strictly above the
/// threshold, ignoring rounding noise in the averaged path length.
pub fn split_inliers_outliers(scores: &[f64], threshold: f64) -> (Vec<usize>, Vec<usize>) {
    (0..scores.len()).partition(|&k| scores[k] <= threshold + 1e-12)
}
