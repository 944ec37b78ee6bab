//! Gaussian-mechanism noise scale, for comparison with the Laplace counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Composition {
    Basic,
    Advanced { delta_prime: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianBudget {
    pub epsilon_v: f64,
    pub delta_v: f64,
    pub sigma: f64,
    pub composition: Composition,
}

/// σ = √(2 ln(1.25/δ_v)) / ε_v.
pub fn gaussian_sigma(epsilon_v: f64, delta_v: f64) -> Result<f64> {
    if !(epsilon_v.is_finite() && epsilon_v > 0.0) {
        return Err(Error::param(format!("epsilon_v must be positive, got {epsilon_v}")));
    }
    if !(delta_v > 0.0 && delta_v < 1.0) {
        return Err(Error::param(format!("delta_v must lie in (0, 1), got {delta_v}")));
    }
    Ok((2.0 * (1.25 / delta_v).ln()).sqrt() / epsilon_v)
}

/// Total (ε, δ) of `num_trees` mechanisms each (ε_v, δ_v)-DP.
pub fn compose_budget(epsilon_v: f64, delta_v: f64, num_trees: usize, composition: Composition) -> Result<(f64, f64)> {
    if !(epsilon_v.is_finite() && epsilon_v > 0.0) || !(0.0..1.0).contains(&delta_v) || num_trees == 0 {
        return Err(Error::param("composition needs epsilon_v > 0, 0 <= delta_v < 1, num_trees >= 1"));
    }
    let t = num_trees as f64;
    match composition {
        Composition::Basic => Ok((t * epsilon_v, t * delta_v)),
        Composition::Advanced { delta_prime } => {
            if !(delta_prime > 0.0 && delta_prime < 1.0) {
                return Err(Error::param(format!("delta_prime must lie in (0, 1), got {delta_prime}")));
            }
            let eps = (2.0 * t * (1.0 / delta_prime).ln()).sqrt() * epsilon_v + t * epsilon_v * epsilon_v.exp_m1();
            Ok((eps, t * delta_v + delta_prime))
        }
    }
}

/// Largest per-tree (ε_v, δ_v) whose composition over `num_trees` fits the
/// total (ε, δ), and the resulting σ. Advanced composition reserves half of
/// δ for δ'.
pub fn gaussian_budget_for_total(
    epsilon: f64,
    delta: f64,
    num_trees: usize,
    advanced: bool,
) -> Result<GaussianBudget> {
    if !(epsilon.is_finite() && epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) || num_trees == 0 {
        return Err(Error::param("need epsilon > 0, 0 < delta < 1 and num_trees >= 1"));
    }
    let t = num_trees as f64;
    let (epsilon_v, delta_v, composition) = if !advanced {
        (epsilon / t, delta / t, Composition::Basic)
    } else {
        let delta_prime = delta / 2.0;
        let delta_v = (delta - delta_prime) / t;
        let composition = Composition::Advanced { delta_prime };
        // the composed ε is increasing in ε_v; bisect
        let (mut lo, mut hi) = (0.0f64, epsilon);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if compose_budget(mid, delta_v, num_trees, composition)?.0 <= epsilon {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, delta_v, composition)
    };
    Ok(GaussianBudget {
        epsilon_v,
        delta_v,
        sigma: gaussian_sigma(epsilon_v, delta_v)?,
        composition,
    })
}
