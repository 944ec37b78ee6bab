use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column indices that jointly one-hot encode one original feature.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OneHotGroup {
    pub attribute_indices: Vec<usize>,
}

impl OneHotGroup {
    pub fn new(attribute_indices: Vec<usize>) -> Self {
        OneHotGroup { attribute_indices }
    }

    pub fn len(&self) -> usize {
        self.attribute_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attribute_indices.is_empty()
    }
}

/// Attribute count plus one-hot structure. Shared by datasets, forests and
/// reconstruction problems.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureLayout {
    num_features: usize,
    groups: Vec<OneHotGroup>,
    group_of: Vec<Option<usize>>,
}

impl FeatureLayout {
    pub fn new(num_features: usize, groups: Vec<OneHotGroup>) -> Result<Self> {
        let mut group_of = vec![None; num_features];
        for (g, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::InvalidDataset(format!("one-hot group {g} is empty")));
            }
            for &a in &group.attribute_indices {
                if a >= num_features {
                    return Err(Error::InvalidDataset(format!(
                        "one-hot group {g} references attribute {a} but M = {num_features}"
                    )));
                }
                if group_of[a].is_some() {
                    return Err(Error::InvalidDataset(format!(
                        "attribute {a} belongs to more than one one-hot group"
                    )));
                }
                group_of[a] = Some(g);
            }
        }
        Ok(FeatureLayout {
            num_features,
            groups,
            group_of,
        })
    }

    pub fn free(num_features: usize) -> Self {
        FeatureLayout {
            num_features,
            groups: Vec::new(),
            group_of: vec![None; num_features],
        }
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn groups(&self) -> &[OneHotGroup] {
        &self.groups
    }

    pub fn group_of(&self, attribute: usize) -> Option<usize> {
        self.group_of[attribute]
    }

    /// Attributes outside every one-hot group.
    pub fn free_attributes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_features).filter(|&a| self.group_of[a].is_none())
    }

    pub fn is_valid_row(&self, row: &[u8]) -> bool {
        row.len() == self.num_features
            && row.iter().all(|&b| b <= 1)
            && self
                .groups
                .iter()
                .all(|g| g.attribute_indices.iter().filter(|&&a| row[a] == 1).count() == 1)
    }

    pub fn check_row(&self, k: usize, row: &[u8]) -> Result<()> {
        if row.len() != self.num_features {
            return Err(Error::InvalidDataset(format!(
                "row {k} has {} entries, expected {}",
                row.len(),
                self.num_features
            )));
        }
        if let Some(a) = row.iter().position(|&b| b > 1) {
            return Err(Error::InvalidDataset(format!(
                "row {k} attribute {a} is {}, not binary",
                row[a]
            )));
        }
        for (g, group) in self.groups.iter().enumerate() {
            let ones = group.attribute_indices.iter().filter(|&&a| row[a] == 1).count();
            if ones != 1 {
                return Err(Error::InvalidDataset(format!(
                    "row {k} has {ones} ones in one-hot group {g}"
                )));
            }
        }
        Ok(())
    }

    /// Number of one-hot valid rows: 2^free · Π |group|.
    pub fn num_valid_rows(&self) -> f64 {
        let free = self.free_attributes().count() as i32;
        self.groups
            .iter()
            .fold(2f64.powi(free), |acc, g| acc * g.len() as f64)
    }

    /// Uniform draw among one-hot valid rows.
    pub fn random_row<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<u8> {
        let mut row = vec![0u8; self.num_features];
        for a in 0..self.num_features {
            if self.group_of[a].is_none() {
                row[a] = u8::from(rng.random_bool(0.5));
            }
        }
        for g in &self.groups {
            let pick = rng.random_range(0..g.len());
            row[g.attribute_indices[pick]] = 1;
        }
        row
    }

    /// All one-hot valid rows in lexicographic order of their bit vectors.
    pub fn valid_rows(&self) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        let mut row = vec![0u8; self.num_features];
        self.extend_valid(0, &mut row, &mut out);
        out
    }

    fn extend_valid(&self, a: usize, row: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if a == self.num_features {
            if self.is_valid_row(row) {
                out.push(row.clone());
            }
            return;
        }
        for bit in [0u8, 1] {
            row[a] = bit;
            if let Some(g) = self.group_of[a] {
                // prune: a group may not hold two ones, and its last member
                // must be 1 if no earlier member is.
                let members = &self.groups[g].attribute_indices;
                let ones_so_far = members.iter().filter(|&&b| b <= a && row[b] == 1).count();
                let remaining = members.iter().filter(|&&b| b > a).count();
                if ones_so_far > 1 || (ones_so_far == 0 && remaining == 0) {
                    continue;
                }
            }
            self.extend_valid(a + 1, row, out);
        }
        row[a] = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_enumeration_agree() {
        let layout = FeatureLayout::new(5, vec![OneHotGroup::new(vec![1, 3, 4])]).unwrap();
        let rows = layout.valid_rows();
        assert_eq!(rows.len() as f64, layout.num_valid_rows());
        assert_eq!(rows.len(), 12);
        assert!(rows.windows(2).all(|w| w[0] < w[1]));
        assert!(rows.iter().all(|r| layout.is_valid_row(r)));
    }

    #[test]
    fn rejects_overlapping_groups() {
        let err = FeatureLayout::new(3, vec![OneHotGroup::new(vec![0, 1]), OneHotGroup::new(vec![1, 2])]);
        assert!(err.is_err());
        assert!(FeatureLayout::new(2, vec![OneHotGroup::new(vec![0, 2])]).is_err());
    }
}
