use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::forest::Forest;
use crate::stats::t95;

/// Confidence interval on the training-set size, from the per-tree sums of
/// noisy counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NInterval {
    /// Mean over trees of the summed noisy counts.
    pub n_star: f64,
    /// Standard deviation of one tree's summed noise.
    pub sigma_zeta: f64,
    pub t95: f64,
    pub n_min: usize,
    pub n_max: usize,
}

/// N* ± t95·σ_ζ/√|T|, rounded outward, with n_min ≥ 1. σ_ζ = √(2·L·|C|)/ε_v
/// where L is the largest leaf count among the trees. With a single tree the
/// normal coefficient 1.96 is used.
pub fn estimate_n_interval(forest: &Forest) -> Result<NInterval> {
    let t = forest.num_trees();
    let noisy = forest.noisy_counts_flat();
    let cells = forest.cell_layout();
    let totals: Vec<f64> = (0..t)
        .map(|i| noisy[cells.tree_range(i)].iter().sum::<i64>() as f64)
        .collect();
    let n_star = totals.iter().sum::<f64>() / t as f64;
    let max_leaves = forest.trees().iter().map(|tr| tr.num_leaves()).max().unwrap_or(1);
    let sigma_zeta = match forest.epsilon_per_leaf().finite_f64() {
        Some(e) => (2.0 * max_leaves as f64 * forest.num_classes() as f64).sqrt() / e,
        None => 0.0,
    };
    if t == 1 {
        log::warn!("a single tree gives no degrees of freedom; using the normal coefficient 1.96");
    }
    let coef = t95(t - 1);
    let half = coef * sigma_zeta / (t as f64).sqrt();
    let n_max = (n_star + half).ceil().max(1.0) as usize;
    let n_min = ((n_star - half).floor().max(1.0) as usize).min(n_max);
    Ok(NInterval {
        n_star,
        sigma_zeta,
        t95: coef,
        n_min,
        n_max,
    })
}
