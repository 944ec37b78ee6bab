use anyhow::Result;
use dprf_core::forest::{compose_budget, gaussian_budget_for_total, gaussian_sigma, Composition};
use dprf_core::NoiseModel;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PmfRow {
    pub l: i64,
    pub p: f64,
    pub log_p: f64,
}

/// The integer-noise pmf over [−γ, γ] for a per-leaf budget.
pub fn pmf_table(epsilon_v: f64) -> Result<Vec<PmfRow>> {
    let model = NoiseModel::new(Some(epsilon_v))?;
    Ok(model
        .pmf_table()
        .into_iter()
        .map(|(l, p)| PmfRow { l, p, log_p: p.ln() })
        .collect())
}

/// Noise scale of the Laplace and Gaussian mechanisms for the same forest
/// budget, one row per composition rule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseComparison {
    pub composition: String,
    pub num_trees: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub epsilon_v: f64,
    pub delta_v: f64,
    pub gaussian_sigma: f64,
    /// Standard deviation √2·|T|/ε of the Laplace noise per count.
    pub laplace_std: f64,
    /// (ε, δ) actually reached by composing the per-tree budget.
    pub composed_epsilon: f64,
    pub composed_delta: f64,
}

pub fn noise_comparison(num_trees: usize, epsilon: f64, delta: f64) -> Result<Vec<NoiseComparison>> {
    let laplace_std = 2f64.sqrt() * num_trees as f64 / epsilon;
    let mut rows = Vec::new();
    let basic_eps_v = epsilon / num_trees as f64;
    let basic_delta_v = delta / num_trees as f64;
    let (ce, cd) = compose_budget(basic_eps_v, basic_delta_v, num_trees, Composition::Basic)?;
    rows.push(NoiseComparison {
        composition: "basic".into(),
        num_trees,
        epsilon,
        delta,
        epsilon_v: basic_eps_v,
        delta_v: basic_delta_v,
        gaussian_sigma: gaussian_sigma(basic_eps_v, basic_delta_v)?,
        laplace_std,
        composed_epsilon: ce,
        composed_delta: cd,
    });
    let adv = gaussian_budget_for_total(epsilon, delta, num_trees, true)?;
    let (ce, cd) = compose_budget(adv.epsilon_v, adv.delta_v, num_trees, adv.composition)?;
    rows.push(NoiseComparison {
        composition: "advanced".into(),
        num_trees,
        epsilon,
        delta,
        epsilon_v: adv.epsilon_v,
        delta_v: adv.delta_v,
        gaussian_sigma: adv.sigma,
        laplace_std,
        composed_epsilon: ce,
        composed_delta: cd,
    });
    Ok(rows)
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
