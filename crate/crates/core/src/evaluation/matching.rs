use serde::{Deserialize, Serialize};

use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingResult {
    /// `assignment[i]` is the original row matched to reconstructed row `i`.
    pub assignment: Vec<usize>,
    pub total_cost: i64,
    pub per_pair_costs: Vec<i64>,
}

/// cost[i][j] = Manhattan distance between reconstructed row i and original
/// row j. Labels are not part of the distance.
pub fn manhattan_cost_matrix(reconstructed: &BinaryDataset, original: &BinaryDataset) -> Result<Vec<Vec<i64>>> {
    if reconstructed.n() != original.n() || reconstructed.m() != original.m() {
        return Err(Error::DimensionMismatch(format!(
            "reconstruction is {}x{}, original is {}x{}",
            reconstructed.n(),
            reconstructed.m(),
            original.n(),
            original.m()
        )));
    }
    Ok(reconstructed
        .rows()
        .iter()
        .map(|r| {
            original
                .rows()
                .iter()
                .map(|o| r.iter().zip(o).filter(|(a, b)| a != b).count() as i64)
                .collect()
        })
        .collect())
}

/// Minimum-cost perfect matching (shortest augmenting paths with
/// potentials, O(n³)).
pub fn min_cost_matching(cost: &[Vec<i64>]) -> Result<MatchingResult> {
    let n = cost.len();
    if cost.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("cost matrix is not square".into()));
    }
    const INF: i64 = i64::MAX / 4;
    // 1-based; column 0 is a virtual source
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if col_owner[j] > 0 {
            assignment[col_owner[j] - 1] = j - 1;
        }
    }
    let per_pair_costs: Vec<i64> = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).collect();
    Ok(MatchingResult {
        total_cost: per_pair_costs.iter().sum(),
        assignment,
        per_pair_costs,
    })
}
