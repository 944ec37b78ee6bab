use serde::{Deserialize, Serialize};

use super::isolation::{isolation_scores, split_inliers_outliers, DEFAULT_NUM_ITREES, DEFAULT_SUBSAMPLE, DEFAULT_THRESHOLD};
use super::leak::{privacy_leak_cdf, LeakResult};
use super::metrics::{majority_baseline, match_datasets, perfect_reconstruction_stats, random_baseline};
use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::forest::{CountMode, Forest};
use crate::rng::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetStats {
    pub count: usize,
    /// Mean per-row error; 0 for an empty subset.
    pub avg_error: f64,
    pub proportion_perfect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n: usize,
    pub m: usize,
    pub reconstruction_error: f64,
    pub random_baseline_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub majority_baseline_error: Option<f64>,
    pub proportion_perfect: f64,
    pub worst_individual_error: f64,
    /// Share of matched pairs whose labels agree.
    pub label_agreement: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inlier_stats: Option<SubsetStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outlier_stats: Option<SubsetStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privacy_leak: Option<LeakResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_train: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_test: Option<f64>,
}

impl EvaluationReport {
    pub fn privacy_leak_cdf(&self) -> Option<f64> {
        self.privacy_leak.as_ref().map(|l| l.cdf)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationOptions {
    pub random_runs: usize,
    /// 0 disables the privacy-leak estimate.
    pub leak_samples: usize,
    pub outlier_analysis: bool,
    pub num_itrees: usize,
    pub subsample: usize,
    pub outlier_threshold: f64,
}

impl Default for EvaluationOptions {
    fn default() -> Self {
        EvaluationOptions {
            random_runs: 100,
            leak_samples: 100,
            outlier_analysis: true,
            num_itrees: DEFAULT_NUM_ITREES,
            subsample: DEFAULT_SUBSAMPLE,
            outlier_threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// Inputs besides the two datasets; every field is optional.
#[derive(Clone, Copy, Default)]
pub struct EvaluationContext<'a> {
    pub heldout: Option<&'a BinaryDataset>,
    pub forest: Option<&'a Forest>,
    /// Known rows of an informed adversary, for the majority baseline.
    pub known_rows: Option<&'a BinaryDataset>,
}

/// Scores a reconstruction against the training set it targets. Row counts
/// must already agree.
pub fn evaluate(
    reconstructed: &BinaryDataset,
    original: &BinaryDataset,
    ctx: EvaluationContext<'_>,
    options: &EvaluationOptions,
    seed: u64,
) -> Result<EvaluationReport> {
    let (n, m) = (original.n(), original.m());
    if n == 0 || m == 0 {
        return Err(Error::DimensionMismatch("the original dataset has no cells".into()));
    }
    let matching = match_datasets(reconstructed, original)?;
    let reconstruction_error = matching.total_cost as f64 / (n * m) as f64;
    let (proportion_perfect, worst_individual_error) = perfect_reconstruction_stats(&matching, m);
    let label_agreement = matching
        .assignment
        .iter()
        .enumerate()
        .filter(|&(i, &j)| reconstructed.labels()[i] == original.labels()[j])
        .count() as f64
        / n as f64;

    let random_baseline_error = random_baseline(original, options.random_runs, derive_seed(seed, &[1]))?;

    let majority_baseline_error = match ctx.known_rows {
        Some(known) if known.n() > 0 => {
            let guess = majority_baseline(known)?;
            let total: usize = original
                .rows()
                .iter()
                .map(|o| o.iter().zip(&guess).filter(|(a, b)| a != b).count())
                .sum();
            Some(total as f64 / (n * m) as f64)
        }
        _ => None,
    };

    let (inlier_stats, outlier_stats) = if options.outlier_analysis {
        let scores = isolation_scores(original, options.num_itrees, options.subsample, derive_seed(seed, &[2]));
        let mut per_original = vec![0i64; n];
        for (i, &j) in matching.assignment.iter().enumerate() {
            per_original[j] = matching.per_pair_costs[i];
        }
        let (inl, out) = split_inliers_outliers(&scores, options.outlier_threshold);
        let stats = |idx: &[usize]| {
            let count = idx.len();
            let (sum, perfect) = idx
                .iter()
                .fold((0i64, 0usize), |(s, p), &j| (s + per_original[j], p + usize::from(per_original[j] == 0)));
            let denom = count.max(1) as f64;
            SubsetStats {
                count,
                avg_error: sum as f64 / (denom * m as f64),
                proportion_perfect: perfect as f64 / denom,
            }
        };
        (Some(stats(&inl)), Some(stats(&out)))
    } else {
        (None, None)
    };

    let privacy_leak = match ctx.heldout {
        Some(pool) if options.leak_samples > 0 && pool.n() >= n => Some(privacy_leak_cdf(
            reconstructed,
            original,
            pool,
            options.leak_samples,
            derive_seed(seed, &[3]),
        )?),
        Some(pool) if options.leak_samples > 0 => {
            log::warn!("held-out pool has {} rows, fewer than {n}; skipping the privacy-leak estimate", pool.n());
            None
        }
        _ => None,
    };

    let (accuracy_train, accuracy_test) = match ctx.forest {
        Some(f) => (
            Some(f.accuracy(original, CountMode::Noisy)?),
            ctx.heldout.map(|h| f.accuracy(h, CountMode::Noisy)).transpose()?,
        ),
        None => (None, None),
    };

    Ok(EvaluationReport {
        n,
        m,
        reconstruction_error,
        random_baseline_error,
        majority_baseline_error,
        proportion_perfect,
        worst_individual_error,
        label_agreement,
        inlier_stats,
        outlier_stats,
        privacy_leak,
        accuracy_train,
        accuracy_test,
    })
}
