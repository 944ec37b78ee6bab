use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use dprf_core::dataset::{generate_synthetic, LabelRule, SyntheticSpec};
use dprf_core::evaluation::{manhattan_cost_matrix, min_cost_matching};
use dprf_core::noise::log_noise_pmf;
use dprf_core::reconstruction::{build_problem, solve_anytime, AnytimeConfig, ThreatModel};
use dprf_core::{train_dp_forest, BinaryDataset, CountMode, ForestParams};

fn data(n: usize, seed: u64) -> BinaryDataset {
    generate_synthetic(&SyntheticSpec {
        m_features: 16,
        n_rows: n,
        class_balance: 0.5,
        group_layout: vec![4, 3],
        seed,
        label_rule: LabelRule::Bernoulli,
    })
    .unwrap()
}

fn forest_params(epsilon: &str) -> ForestParams {
    ForestParams {
        num_trees: 10,
        depth: 5,
        epsilon: epsilon.parse().unwrap(),
    }
}

fn routing(c: &mut Criterion) {
    let ds = data(1000, 1);
    let f = train_dp_forest(&ds, &forest_params("10"), 1).unwrap();
    c.bench_function("train forest T=10 d=5 N=1000", |b| {
        b.iter(|| train_dp_forest(black_box(&ds), &forest_params("10"), 1).unwrap())
    });
    c.bench_function("soft voting accuracy N=1000", |b| {
        b.iter(|| f.accuracy(black_box(&ds), CountMode::Noisy).unwrap())
    });
}

fn matching(c: &mut Criterion) {
    let a = data(100, 2);
    let b = data(100, 3);
    c.bench_function("hungarian N=100", |bench| {
        bench.iter(|| {
            let cost = manhattan_cost_matrix(black_box(&a), black_box(&b)).unwrap();
            min_cost_matching(&cost).unwrap()
        })
    });
}

fn pmf(c: &mut Criterion) {
    c.bench_function("log pmf over [-1200, 1200]", |b| {
        b.iter(|| (-1200..=1200).map(|l| log_noise_pmf(black_box(0.01), l)).sum::<f64>())
    });
}

fn anytime(c: &mut Criterion) {
    let ds = data(100, 4);
    let f = train_dp_forest(&ds, &forest_params("30"), 4).unwrap();
    let p = build_problem(&f.attacker_view(), ThreatModel::Full { n: 100 }).unwrap();
    let cfg = AnytimeConfig {
        time_budget: Duration::from_millis(200),
        restarts: 1,
        ..Default::default()
    };
    let mut group = c.benchmark_group("anytime");
    group.sample_size(10);
    group.bench_function("200 ms search N=100 T=10 d=5", |b| {
        b.iter(|| solve_anytime(black_box(&p), &cfg, 4).unwrap().moves)
    });
    group.finish();
}

criterion_group!(benches, routing, matching, pmf, anytime);
criterion_main!(benches);
