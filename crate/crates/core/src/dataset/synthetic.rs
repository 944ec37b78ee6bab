//! Seeded synthetic data: a product of Bernoullis per class, with one-hot
//! groups drawn categorically.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::RngExt;
use serde::{Deserialize, Serialize};

use super::{BinaryDataset, FeatureLayout, OneHotGroup};
use crate::error::{Error, Result};
use crate::rng::rng_from;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "attribute")]
pub enum LabelRule {
    /// Class drawn with P(class 1) = class_balance, then the row from that
    /// class's distribution.
    #[default]
    Bernoulli,
    /// Row drawn from a single distribution, label equal to a free attribute.
    /// Gives a perfectly separable dataset.
    Attribute(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub m_features: usize,
    pub n_rows: usize,
    pub class_balance: f64,
    /// Sizes of the one-hot groups, laid out on the leading columns.
    #[serde(default)]
    pub group_layout: Vec<usize>,
    pub seed: u64,
    #[serde(default)]
    pub label_rule: LabelRule,
}

/// The fixed distribution behind a synthetic dataset. Sampling more rows from
/// the same model gives a held-out pool.
#[derive(Clone, Debug)]
pub struct SyntheticModel {
    layout: FeatureLayout,
    class_balance: f64,
    label_rule: LabelRule,
    /// [class][attribute] probability of a 1 (free attributes only).
    bit_p: Vec<Vec<f64>>,
    /// [class][group] categorical weights.
    group_w: Vec<Vec<Vec<f64>>>,
}

impl SyntheticModel {
    pub fn new(
        m_features: usize,
        class_balance: f64,
        group_layout: &[usize],
        label_rule: LabelRule,
        seed: u64,
    ) -> Result<Self> {
        if !(class_balance > 0.0 && class_balance < 1.0) {
            return Err(Error::param(format!("class_balance {class_balance} not in (0, 1)")));
        }
        if group_layout.iter().sum::<usize>() > m_features || group_layout.contains(&0) {
            return Err(Error::param(format!(
                "group layout {group_layout:?} does not fit in {m_features} features"
            )));
        }
        let mut groups = Vec::new();
        let mut start = 0;
        for &s in group_layout {
            groups.push(OneHotGroup::new((start..start + s).collect()));
            start += s;
        }
        let layout = FeatureLayout::new(m_features, groups)?;
        if let LabelRule::Attribute(a) = label_rule {
            if a >= m_features || layout.group_of(a).is_some() {
                return Err(Error::param(format!("label attribute {a} must be a free attribute")));
            }
        }

        let mut rng = rng_from(seed, &[0x6d6f_6465]);
        let mut bit_p = Vec::new();
        let mut group_w = Vec::new();
        for _ in 0..2 {
            bit_p.push((0..m_features).map(|_| rng.random_range(0.1..0.9)).collect());
            group_w.push(
                layout
                    .groups()
                    .iter()
                    .map(|g| (0..g.len()).map(|_| rng.random_range(0.2..1.0)).collect())
                    .collect(),
            );
        }
        Ok(SyntheticModel {
            layout,
            class_balance,
            label_rule,
            bit_p,
            group_w,
        })
    }

    pub fn from_spec(spec: &SyntheticSpec) -> Result<Self> {
        Self::new(
            spec.m_features,
            spec.class_balance,
            &spec.group_layout,
            spec.label_rule,
            spec.seed,
        )
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn sample(&self, n_rows: usize, seed: u64) -> BinaryDataset {
        let mut rng = rng_from(seed, &[0x726f_7773]);
        let mut rows = Vec::with_capacity(n_rows);
        let mut labels = Vec::with_capacity(n_rows);
        for _ in 0..n_rows {
            let class = match self.label_rule {
                LabelRule::Bernoulli => usize::from(rng.random_bool(self.class_balance)),
                LabelRule::Attribute(_) => 0,
            };
            let mut row = vec![0u8; self.layout.num_features()];
            for a in self.layout.free_attributes() {
                row[a] = u8::from(rng.random_bool(self.bit_p[class][a]));
            }
            for (g, group) in self.layout.groups().iter().enumerate() {
                let dist = WeightedIndex::new(&self.group_w[class][g]).expect("positive weights");
                row[group.attribute_indices[dist.sample(&mut rng)]] = 1;
            }
            let label = match self.label_rule {
                LabelRule::Bernoulli => class,
                LabelRule::Attribute(a) => usize::from(row[a]),
            };
            rows.push(row);
            labels.push(label);
        }
        BinaryDataset::new(self.layout.clone(), 2, rows, labels).expect("generator emits valid rows")
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<BinaryDataset> {
    Ok(SyntheticModel::from_spec(spec)?.sample(spec.n_rows, spec.seed))
}
