mod common;

use common::{dataset, hamming, permutations, synthetic};
use dprf_core::evaluation::{
    align_unknown_n, evaluate, isolation_scores, leak_cdf, majority_baseline, manhattan_cost_matrix,
    min_cost_matching, perfect_reconstruction_stats, privacy_leak_cdf, random_baseline, reconstruction_error,
    split_inliers_outliers, EvaluationContext, EvaluationOptions,
};
use dprf_core::{BinaryDataset, FeatureLayout, OneHotGroup};
use proptest::prelude::*;

fn brute_force(cost: &[Vec<i64>]) -> i64 {
    permutations(cost.len())
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum())
        .min()
        .unwrap()
}

fn matrix() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1usize..=7).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0i64..20, n), n))
}

fn free_dataset(n: usize, m: usize) -> impl Strategy<Value = BinaryDataset> {
    prop::collection::vec(prop::collection::vec(0u8..2, m), n)
        .prop_map(move |rows| dataset(rows, vec![0; n], vec![]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hungarian_equals_brute_force(cost in matrix()) {
        let r = min_cost_matching(&cost).unwrap();
        prop_assert_eq!(r.total_cost, brute_force(&cost));
        let mut seen = r.assignment.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..cost.len()).collect::<Vec<_>>());
        prop_assert_eq!(r.per_pair_costs.iter().sum::<i64>(), r.total_cost);
    }

    #[test]
    fn cost_matrix_matches_double_loop(a in free_dataset(5, 6), b in free_dataset(5, 6)) {
        let c = manhattan_cost_matrix(&a, &b).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                prop_assert_eq!(c[i][j] as usize, hamming(a.row(i), b.row(j)));
            }
        }
    }

    #[test]
    fn error_is_permutation_invariant(
        a in free_dataset(6, 5),
        b in free_dataset(6, 5),
        p in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
        q in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let e = reconstruction_error(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
        prop_assert_eq!(reconstruction_error(&a.select(&p), &b.select(&q)).unwrap(), e);
        prop_assert_eq!(reconstruction_error(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(reconstruction_error(&a.select(&p), &a).unwrap(), 0.0);
    }

    #[test]
    fn majority_is_a_valid_medoid(
        rows in prop::collection::vec(prop::collection::vec(0u8..2, 2), 1..8),
        group_rows in prop::collection::vec(0usize..3, 1..8),
    ) {
        // two free attributes followed by a 3-member group
        let n = rows.len().min(group_rows.len());
        let full: Vec<Vec<u8>> = (0..n)
            .map(|k| {
                let mut r = rows[k].clone();
                r.extend((0..3).map(|i| u8::from(i == group_rows[k])));
                r
            })
            .collect();
        let ds = dataset(full.clone(), vec![0; n], vec![OneHotGroup::new(vec![2, 3, 4])]);
        let guess = majority_baseline(&ds).unwrap();
        prop_assert!(ds.layout().is_valid_row(&guess));
        let total = |r: &[u8]| full.iter().map(|o| hamming(r, o)).sum::<usize>();
        let best = ds.layout().valid_rows().iter().map(|r| total(r)).min().unwrap();
        prop_assert_eq!(total(&guess), best);
    }

    #[test]
    fn leak_cdf_monotone(mean in 0.0f64..1.0, std in 0.001f64..0.5, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(leak_cdf(lo, mean, std).0 <= leak_cdf(hi, mean, std).0);
    }
}

#[test]
fn matching_examples() {
    let d = dataset(vec![vec![0, 1, 1], vec![1, 1, 0], vec![0, 0, 0]], vec![0, 1, 0], vec![]);
    let c = manhattan_cost_matrix(&d, &d).unwrap();
    assert!((0..3).all(|i| c[i][i] == 0));
    let a = dataset(vec![vec![0, 0, 0, 0]], vec![0], vec![]);
    let b = dataset(vec![vec![1, 1, 1, 1]], vec![0], vec![]);
    assert_eq!(manhattan_cost_matrix(&a, &b).unwrap(), vec![vec![4]]);
    let shorter = dataset(vec![vec![0, 0, 0]], vec![0], vec![]);
    assert!(manhattan_cost_matrix(&a, &shorter).is_err());
}

#[test]
fn one_bit_wrong() {
    let orig = synthetic(15, 100, vec![], 4);
    let mut rows = orig.rows().to_vec();
    rows[17][3] ^= 1;
    let recon = BinaryDataset::new(orig.layout().clone(), 2, rows, orig.labels().to_vec()).unwrap();
    let e = reconstruction_error(&recon, &orig).unwrap();
    assert!((e - 1.0 / 1500.0).abs() < 1e-15);
}

#[test]
fn perfect_and_worst() {
    let orig = dataset(vec![vec![0, 0, 1], vec![1, 1, 0], vec![1, 0, 1]], vec![0; 3], vec![]);
    let m = min_cost_matching(&manhattan_cost_matrix(&orig, &orig).unwrap()).unwrap();
    assert_eq!(perfect_reconstruction_stats(&m, 3), (1.0, 0.0));
    let wrong = dataset(vec![vec![0, 0, 1], vec![1, 1, 0], vec![0, 1, 0]], vec![0; 3], vec![]);
    let m = min_cost_matching(&manhattan_cost_matrix(&wrong, &orig).unwrap()).unwrap();
    let (p, w) = perfect_reconstruction_stats(&m, 3);
    assert!((p - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(w, 1.0);
}

#[test]
fn alignment() {
    let d = synthetic(4, 7, vec![], 2);
    assert_eq!(align_unknown_n(&d, 7, 0).unwrap(), d);
    let down = align_unknown_n(&d, 5, 0).unwrap();
    assert_eq!(down.n(), 5);
    // subsampling without replacement keeps multiplicities within the source
    for r in down.rows() {
        let have = down.rows().iter().filter(|x| *x == r).count();
        let src = d.rows().iter().filter(|x| *x == r).count();
        assert!(have <= src);
    }
    let distinct = dataset(vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]], vec![0; 4], vec![]);
    let up = align_unknown_n(&distinct, 5, 0).unwrap();
    assert_eq!(up.n(), 5);
    assert!(up.rows().iter().all(|r| distinct.rows().contains(r)));
    let mut sorted = up.rows().to_vec();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), 4);
}

#[test]
fn random_baseline_single_attribute() {
    let d = dataset(vec![vec![1]], vec![0], vec![]);
    let e = random_baseline(&d, 4000, 1).unwrap();
    assert!((e - 0.5).abs() < 0.03, "{e}");
}

#[test]
fn random_baseline_has_matching_advantage() {
    // two uniform datasets matched optimally are closer than M/2 per row
    let orig = synthetic(6, 20, vec![], 3);
    let e = random_baseline(&orig, 50, 2).unwrap();
    assert!(e < 0.5, "{e}");
}

#[test]
fn majority_examples() {
    let d = dataset(vec![vec![0, 1], vec![0, 1], vec![1, 0]], vec![0; 3], vec![]);
    assert_eq!(majority_baseline(&d).unwrap(), vec![0, 1]);
    let one = dataset(vec![vec![1, 0, 1]], vec![0], vec![OneHotGroup::new(vec![1, 2])]);
    assert_eq!(majority_baseline(&one).unwrap(), vec![1, 0, 1]);
    assert!(majority_baseline(&one.empty_like()).is_err());
}

#[test]
fn planted_outlier_scores_highest() {
    // a tight cluster of near-identical rows and one complementary row
    let m = 10;
    let mut rows = Vec::new();
    for k in 0..60 {
        let mut r = vec![0u8; m];
        r[k % 3] = 1;
        rows.push(r);
    }
    rows.push(vec![1; m]);
    let n = rows.len();
    let ds = BinaryDataset::new(FeatureLayout::free(m), 2, rows, vec![0; n]).unwrap();
    let s = isolation_scores(&ds, 100, 256, 9);
    let argmax = (0..n).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
    assert_eq!(argmax, n - 1);
    let (inl, out) = split_inliers_outliers(&s, 0.5);
    assert_eq!(inl.len() + out.len(), n);
    assert!(out.contains(&(n - 1)));
    let mut all: Vec<usize> = inl.iter().chain(&out).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..n).collect::<Vec<_>>());
}

#[test]
fn leak_cdf_at_the_mean_is_half() {
    assert_eq!(leak_cdf(0.3, 0.3, 0.1), (0.5, false));
    assert_eq!(leak_cdf(0.3, 0.3, 0.0), (0.5, true));
    assert_eq!(leak_cdf(0.1, 0.3, 0.0), (0.0, true));
    assert_eq!(leak_cdf(0.4, 0.3, 0.0), (1.0, true));
}

#[test]
fn leak_of_a_perfect_reconstruction_is_small() {
    let pool = synthetic(12, 400, vec![3], 5);
    let train = pool.select(&(0..30).collect::<Vec<_>>());
    let heldout = pool.select(&(30..400).collect::<Vec<_>>());
    let r = privacy_leak_cdf(&train, &train, &heldout, 50, 1).unwrap();
    assert_eq!(r.actual_error, 0.0);
    assert!(r.cdf < 1e-3, "{r:?}");
    assert!(privacy_leak_cdf(&train, &train, &heldout.select(&[0, 1]), 5, 1).is_err());
}

#[test]
fn report_on_perfect_reconstruction() {
    let pool = synthetic(8, 200, vec![3], 6);
    let train = pool.select(&(0..25).collect::<Vec<_>>());
    let heldout = pool.select(&(25..200).collect::<Vec<_>>());
    let opts = EvaluationOptions { random_runs: 10, leak_samples: 20, ..Default::default() };
    let ctx = EvaluationContext { heldout: Some(&heldout), known_rows: Some(&heldout), ..Default::default() };
    let r = evaluate(&train, &train, ctx, &opts, 1).unwrap();
    assert_eq!(r.reconstruction_error, 0.0);
    assert_eq!(r.proportion_perfect, 1.0);
    assert_eq!(r.worst_individual_error, 0.0);
    assert_eq!(r.label_agreement, 1.0);
    let (i, o) = (r.inlier_stats.clone().unwrap(), r.outlier_stats.clone().unwrap());
    assert_eq!(i.count + o.count, 25);
    assert!(r.random_baseline_error > 0.0 && r.random_baseline_error < 1.0);
    assert!(r.majority_baseline_error.unwrap() > 0.0);
    assert!(r.privacy_leak_cdf().unwrap() < 0.05);
}
