#![allow(dead_code)]

use dprf_core::dataset::{generate_synthetic, LabelRule, SyntheticSpec};
use dprf_core::{BinaryDataset, FeatureLayout, OneHotGroup};

pub fn dataset(rows: Vec<Vec<u8>>, labels: Vec<usize>, groups: Vec<OneHotGroup>) -> BinaryDataset {
    let m = rows.first().map_or(0, Vec::len);
    BinaryDataset::new(FeatureLayout::new(m, groups).unwrap(), 2, rows, labels).unwrap()
}

pub fn synthetic(m: usize, n: usize, groups: Vec<usize>, seed: u64) -> BinaryDataset {
    generate_synthetic(&SyntheticSpec {
        m_features: m,
        n_rows: n,
        class_balance: 0.5,
        group_layout: groups,
        seed,
        label_rule: LabelRule::Bernoulli,
    })
    .unwrap()
}

pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Every permutation of 0..n in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = vec![p.clone()];
    loop {
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
        out.push(p.clone());
    }
}
