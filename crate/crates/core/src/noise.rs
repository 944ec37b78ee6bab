//! Integer-cast Laplace noise: closed-form pmf, truncation bound and
//! log-likelihood scoring of inferred noise vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum probability mass kept inside [−γ, γ].
pub const MIN_COVERAGE: f64 = 0.999;

fn check_eps(epsilon_v: f64) -> Result<()> {
    if epsilon_v.is_finite() && epsilon_v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("per-leaf budget must be positive and finite, got {epsilon_v}")))
    }
}

/// log P(int(Y) = l) for Y ~ Lap(1/ε).
pub fn log_noise_pmf(epsilon_v: f64, l: i64) -> f64 {
    // ln(1 - e^{-ε}) without cancellation at small ε
    let ln_mass = (-(-epsilon_v).exp_m1()).ln();
    if l == 0 {
        ln_mass
    } else {
        ln_mass - std::f64::consts::LN_2 - l.unsigned_abs() as f64 * epsilon_v
    }
}

/// P(int(Y) = l) for Y ~ Lap(1/ε): 1 − e^{−ε} at zero and
/// ½(e^{−|l|ε} − e^{−(|l|+1)ε}) elsewhere.
pub fn noise_pmf(epsilon_v: f64, l: i64) -> f64 {
    log_noise_pmf(epsilon_v, l).exp()
}

/// P(|int(Y)| ≤ γ) = 1 − e^{−(γ+1)ε}.
pub fn coverage(epsilon_v: f64, gamma: i64) -> f64 {
    -(-(gamma as f64 + 1.0) * epsilon_v).exp_m1()
}

/// γ = ⌈12/ε_v⌉, widened if the coverage were ever below [`MIN_COVERAGE`].
pub fn gamma_bound(epsilon_v: f64) -> Result<i64> {
    check_eps(epsilon_v)?;
    let x = 12.0 / epsilon_v;
    // 12/0.01 evaluates to 1200.0000000000002; snap values within rounding
    // error of an integer before taking the ceiling.
    let r = x.round();
    let mut gamma = if (x - r).abs() <= 1e-9 * x.max(1.0) { r } else { x.ceil() } as i64;
    gamma = gamma.max(1);
    while coverage(epsilon_v, gamma) < MIN_COVERAGE {
        log::warn!("widening gamma {gamma} for epsilon_v {epsilon_v} to reach coverage {MIN_COVERAGE}");
        gamma += 1;
    }
    Ok(gamma)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    /// Values outside [−γ, γ] are impossible.
    Hard,
    /// Values outside [−γ, γ] are penalized linearly with slope ε_v.
    Soft,
}

/// Inferred noise per (tree, leaf, class) cell: published minus derived count.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeltaVector(pub Vec<i64>);

/// Scoring table for one per-leaf budget.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    epsilon_v: Option<f64>,
    gamma: i64,
    /// log p_l for l = 0..=γ (the pmf is symmetric).
    log_pmf: Vec<f64>,
    tail_slope: f64,
}

impl NoiseModel {
    /// `None` is the noise-free limit: γ = 0, log p_0 = 0, and the soft tail
    /// falls off with slope 1.
    pub fn new(epsilon_v: Option<f64>) -> Result<Self> {
        match epsilon_v {
            None => Ok(NoiseModel {
                epsilon_v: None,
                gamma: 0,
                log_pmf: vec![0.0],
                tail_slope: 1.0,
            }),
            Some(e) => {
                let gamma = gamma_bound(e)?;
                Ok(NoiseModel {
                    epsilon_v: Some(e),
                    gamma,
                    log_pmf: (0..=gamma).map(|l| log_noise_pmf(e, l)).collect(),
                    tail_slope: e,
                })
            }
        }
    }

    pub fn epsilon_v(&self) -> Option<f64> {
        self.epsilon_v
    }

    pub fn gamma(&self) -> i64 {
        self.gamma
    }

    pub fn tail_slope(&self) -> f64 {
        self.tail_slope
    }

    /// Highest attainable per-cell score, log p_0.
    pub fn max_log_p(&self) -> f64 {
        self.log_pmf[0]
    }

    #[inline]
    pub fn log_p(&self, delta: i64, mode: TailMode) -> f64 {
        let a = delta.unsigned_abs() as usize;
        if a <= self.gamma as usize {
            self.log_pmf[a]
        } else {
            match mode {
                TailMode::Hard => f64::NEG_INFINITY,
                TailMode::Soft => {
                    self.log_pmf[self.gamma as usize] - (a - self.gamma as usize) as f64 * self.tail_slope
                }
            }
        }
    }

    pub fn log_likelihood(&self, deltas: &DeltaVector, mode: TailMode) -> f64 {
        deltas.0.iter().map(|&d| self.log_p(d, mode)).sum()
    }

    pub fn in_domain(&self, delta: i64) -> bool {
        delta.abs() <= self.gamma
    }

    /// (l, p_l) for l in [−γ, γ].
    pub fn pmf_table(&self) -> Vec<(i64, f64)> {
        (-self.gamma..=self.gamma)
            .map(|l| (l, self.log_pmf[l.unsigned_abs() as usize].exp()))
            .collect()
    }
}
