use rand::seq::{IndexedRandom, SliceRandom};

use super::matching::{manhattan_cost_matrix, min_cost_matching, MatchingResult};
use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Optimal matching of reconstructed to original rows.
pub fn match_datasets(reconstructed: &BinaryDataset, original: &BinaryDataset) -> Result<MatchingResult> {
    min_cost_matching(&manhattan_cost_matrix(reconstructed, original)?)
}

/// Share of attribute values that differ under the optimal row matching.
pub fn reconstruction_error(reconstructed: &BinaryDataset, original: &BinaryDataset) -> Result<f64> {
    let r = match_datasets(reconstructed, original)?;
    let cells = original.n() * original.m();
    if cells == 0 {
        return Err(Error::DimensionMismatch("the original dataset has no cells".into()));
    }
    Ok(r.total_cost as f64 / cells as f64)
}

/// Manhattan distance between two rows divided by their length.
pub fn row_error(a: &[u8], b: &[u8]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len() as f64
}

/// Brings a reconstruction to `n_true` rows: subsample without replacement
/// when larger, pad with uniformly drawn duplicates when smaller.
pub fn align_unknown_n(reconstructed: &BinaryDataset, n_true: usize, seed: u64) -> Result<BinaryDataset> {
    let n = reconstructed.n();
    if n == 0 {
        return Err(Error::param("cannot align an empty reconstruction"));
    }
    let mut rng = rng_from(seed, &[0x616c_6967]);
    let mut idx: Vec<usize> = (0..n).collect();
    if n > n_true {
        idx.shuffle(&mut rng);
        idx.truncate(n_true);
        idx.sort_unstable();
    } else {
        let all = idx.clone();
        while idx.len() < n_true {
            idx.push(*all.choose(&mut rng).expect("non-empty"));
        }
    }
    Ok(reconstructed.select(&idx))
}

/// (share of matched pairs at distance 0, largest pair distance / M).
pub fn perfect_reconstruction_stats(matching: &MatchingResult, m: usize) -> (f64, f64) {
    let n = matching.per_pair_costs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let perfect = matching.per_pair_costs.iter().filter(|&&c| c == 0).count();
    let worst = *matching.per_pair_costs.iter().max().unwrap_or(&0);
    (perfect as f64 / n as f64, worst as f64 / m as f64)
}

/// Mean error of `runs` uniformly random one-hot-consistent datasets.
pub fn random_baseline(original: &BinaryDataset, runs: usize, seed: u64) -> Result<f64> {
    if runs == 0 {
        return Err(Error::param("random baseline needs at least one run"));
    }
    let layout = original.layout();
    let mut total = 0.0;
    for r in 0..runs as u64 {
        let mut rng = rng_from(seed, &[0x7261_6e64, r]);
        let rows = (0..original.n()).map(|_| layout.random_row(&mut rng)).collect();
        let guess = BinaryDataset::new(layout.clone(), original.num_classes(), rows, original.labels().to_vec())?;
        total += reconstruction_error(&guess, original)?;
    }
    Ok(total / runs as f64)
}

/// Per-coordinate majority of the known rows (ties go to 1), then each
/// one-hot group repaired with the fewest flips. Among equally short
/// repairs the member with the most ones in the known rows is kept, lowest
/// index first, which makes the result a Manhattan medoid among valid rows.
pub fn majority_baseline(known: &BinaryDataset) -> Result<Vec<u8>> {
    let n = known.n();
    if n == 0 {
        return Err(Error::param("majority baseline needs at least one row"));
    }
    let m = known.m();
    let mut ones = vec![0usize; m];
    for row in known.rows() {
        for (a, &b) in row.iter().enumerate() {
            ones[a] += usize::from(b);
        }
    }
    let mut out: Vec<u8> = ones.iter().map(|&o| u8::from(2 * o >= n)).collect();
    for g in known.groups() {
        let members = &g.attribute_indices;
        let set: Vec<usize> = members.iter().copied().filter(|&a| out[a] == 1).collect();
        // keep one of the set members if any, otherwise turn one on
        let pool = if set.is_empty() { members.clone() } else { set };
        let keep = *pool
            .iter()
            .max_by(|&&a, &&b| ones[a].cmp(&ones[b]).then(b.cmp(&a)))
            .expect("groups are non-empty");
        for &a in members {
            out[a] = u8::from(a == keep);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureLayout, OneHotGroup};

    fn ds(rows: Vec<Vec<u8>>, groups: Vec<OneHotGroup>) -> BinaryDataset {
        let m = rows[0].len();
        let n = rows.len();
        BinaryDataset::new(FeatureLayout::new(m, groups).unwrap(), 2, rows, vec![0; n]).unwrap()
    }

    #[test]
    fn error_values() {
        let a = ds(vec![vec![0, 0, 0, 0]], vec![]);
        let b = ds(vec![vec![1, 1, 1, 1]], vec![]);
        assert_eq!(manhattan_cost_matrix(&a, &b).unwrap(), vec![vec![4]]);
        assert_eq!(reconstruction_error(&a, &a).unwrap(), 0.0);
        assert_eq!(reconstruction_error(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn alignment_sizes() {
        let d = ds(vec![vec![0], vec![1], vec![1]], vec![]);
        assert_eq!(align_unknown_n(&d, 3, 1).unwrap(), d);
        assert_eq!(align_unknown_n(&d, 1, 1).unwrap().n(), 1);
        let padded = align_unknown_n(&d, 5, 1).unwrap();
        assert_eq!(padded.n(), 5);
    }

    #[test]
    fn majority_examples() {
        let d = ds(vec![vec![0, 1], vec![0, 1], vec![1, 0]], vec![]);
        assert_eq!(majority_baseline(&d).unwrap(), vec![0, 1]);
        let single = ds(vec![vec![1, 0, 1]], vec![OneHotGroup::new(vec![0, 1])]);
        assert_eq!(majority_baseline(&single).unwrap(), vec![1, 0, 1]);
        // no member has a majority: the plurality member is chosen
        let g = ds(
            vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 1, 0], vec![0, 0, 1], vec![1, 0, 0], vec![0, 1, 0]],
            vec![OneHotGroup::new(vec![0, 1, 2])],
        );
        assert_eq!(majority_baseline(&g).unwrap(), vec![0, 1, 0]);
    }
}
