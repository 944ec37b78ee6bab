use serde::{Deserialize, Serialize};

use super::metrics::reconstruction_error;
use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::stats::{mean, normal_cdf, std_dev};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakResult {
    /// Φ((actual − mean) / std) under a normal fit to the reference errors.
    pub cdf: f64,
    pub actual_error: f64,
    pub reference_mean: f64,
    pub reference_std: f64,
    /// The reference errors had zero spread.
    pub degenerate: bool,
}

/// Normal-fit cdf of `actual` given reference statistics. With zero spread
/// the result is 0.5 at the mean and 0 or 1 elsewhere.
pub fn leak_cdf(actual: f64, mean: f64, std: f64) -> (f64, bool) {
    if std > 0.0 {
        (normal_cdf((actual - mean) / std), false)
    } else if actual == mean {
        (0.5, true)
    } else {
        (if actual < mean { 0.0 } else { 1.0 }, true)
    }
}

/// How unusual the reconstruction's error on the real training set is,
/// compared with its error on `samples` datasets of the same size drawn
/// without replacement from the held-out pool.
pub fn privacy_leak_cdf(
    reconstructed: &BinaryDataset,
    original: &BinaryDataset,
    heldout_pool: &BinaryDataset,
    samples: usize,
    seed: u64,
) -> Result<LeakResult> {
    let n = original.n();
    if heldout_pool.n() < n {
        return Err(Error::param(format!(
            "held-out pool has {} rows, need at least {n}",
            heldout_pool.n()
        )));
    }
    if samples == 0 {
        return Err(Error::param("privacy leak estimate needs at least one sample"));
    }
    let actual = reconstruction_error(reconstructed, original)?;
    let mut errors = Vec::with_capacity(samples);
    for s in 0..samples as u64 {
        let mut rng = rng_from(seed, &[0x6c65_616b, s]);
        let idx = rand::seq::index::sample(&mut rng, heldout_pool.n(), n).into_vec();
        errors.push(reconstruction_error(reconstructed, &heldout_pool.select(&idx))?);
    }
    let (m, sd) = (mean(&errors), std_dev(&errors));
    let (cdf, degenerate) = leak_cdf(actual, m, sd);
    Ok(LeakResult {
        cdf,
        actual_error: actual,
        reference_mean: m,
        reference_std: sd,
        degenerate,
    })
}
