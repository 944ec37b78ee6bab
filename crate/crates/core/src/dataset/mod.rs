//! Binary datasets with one-hot group metadata.

mod encode;
mod layout;
mod synthetic;

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

pub use encode::{load_csv, ColumnKind, ColumnSpec, EncodingSpec};
pub use layout::{FeatureLayout, OneHotGroup};
pub use synthetic::{generate_synthetic, LabelRule, SyntheticModel, SyntheticSpec};

/// N×M binary matrix with class labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DatasetRecord", into = "DatasetRecord")]
pub struct BinaryDataset {
    layout: FeatureLayout,
    num_classes: usize,
    rows: Vec<Vec<u8>>,
    labels: Vec<usize>,
    feature_names: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct DatasetRecord {
    n: usize,
    m: usize,
    num_classes: usize,
    groups: Vec<OneHotGroup>,
    rows: Vec<Vec<u8>>,
    labels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature_names: Option<Vec<String>>,
}

impl TryFrom<DatasetRecord> for BinaryDataset {
    type Error = Error;

    fn try_from(r: DatasetRecord) -> Result<Self> {
        if r.rows.len() != r.n || r.labels.len() != r.n {
            return Err(Error::InvalidDataset(format!(
                "n = {} but {} rows and {} labels",
                r.n,
                r.rows.len(),
                r.labels.len()
            )));
        }
        let layout = FeatureLayout::new(r.m, r.groups)?;
        let ds = BinaryDataset::new(layout, r.num_classes, r.rows, r.labels)?;
        match r.feature_names {
            Some(names) => ds.with_feature_names(names),
            None => Ok(ds),
        }
    }
}

impl From<BinaryDataset> for DatasetRecord {
    fn from(d: BinaryDataset) -> Self {
        DatasetRecord {
            n: d.n(),
            m: d.m(),
            num_classes: d.num_classes,
            groups: d.layout.groups().to_vec(),
            rows: d.rows,
            labels: d.labels,
            feature_names: d.feature_names,
        }
    }
}

impl BinaryDataset {
    pub fn new(
        layout: FeatureLayout,
        num_classes: usize,
        rows: Vec<Vec<u8>>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidDataset(format!(
                "num_classes must be at least 2, got {num_classes}"
            )));
        }
        if rows.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for (k, row) in rows.iter().enumerate() {
            layout.check_row(k, row)?;
        }
        if let Some(k) = labels.iter().position(|&c| c >= num_classes) {
            return Err(Error::InvalidDataset(format!(
                "label {} of row {k} is not below num_classes = {num_classes}",
                labels[k]
            )));
        }
        Ok(BinaryDataset {
            layout,
            num_classes,
            rows,
            labels,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.m() {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {} attributes",
                names.len(),
                self.m()
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn m(&self) -> usize {
        self.layout.num_features()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn groups(&self) -> &[OneHotGroup] {
        self.layout.groups()
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn row(&self, k: usize) -> &[u8] {
        &self.rows[k]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Rows at the given indices, in that order. Indices may repeat.
    pub fn select(&self, indices: &[usize]) -> BinaryDataset {
        BinaryDataset {
            layout: self.layout.clone(),
            num_classes: self.num_classes,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Same columns, no rows.
    pub fn empty_like(&self) -> BinaryDataset {
        self.select(&[])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// A training sample and the rows left over.
#[derive(Clone, Debug)]
pub struct TrainingSample {
    pub train: BinaryDataset,
    pub heldout: BinaryDataset,
    pub train_indices: Vec<usize>,
}

/// Uniform sample of `n` rows without replacement. The remaining rows, in
/// shuffled order, form the held-out pool.
pub fn sample_training_set(dataset: &BinaryDataset, n: usize, seed: u64) -> Result<TrainingSample> {
    if n > dataset.n() {
        return Err(Error::param(format!(
            "cannot sample {n} rows from a dataset of {}",
            dataset.n()
        )));
    }
    let mut idx: Vec<usize> = (0..dataset.n()).collect();
    idx.shuffle(&mut rng_from(seed, &[0x5a3e]));
    let (train_idx, rest) = idx.split_at(n);
    Ok(TrainingSample {
        train: dataset.select(train_idx),
        heldout: dataset.select(rest),
        train_indices: train_idx.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> BinaryDataset {
        let layout = FeatureLayout::new(3, vec![OneHotGroup::new(vec![1, 2])]).unwrap();
        BinaryDataset::new(
            layout,
            2,
            vec![vec![0, 1, 0], vec![1, 0, 1], vec![1, 1, 0], vec![0, 0, 1]],
            vec![0, 1, 1, 0],
        )
        .unwrap()
    }

    #[test]
    fn rejects_invalid_rows() {
        let layout = FeatureLayout::new(2, vec![OneHotGroup::new(vec![0, 1])]).unwrap();
        assert!(BinaryDataset::new(layout.clone(), 2, vec![vec![1, 1]], vec![0]).is_err());
        assert!(BinaryDataset::new(layout.clone(), 2, vec![vec![0, 2]], vec![0]).is_err());
        assert!(BinaryDataset::new(layout.clone(), 2, vec![vec![0, 1]], vec![2]).is_err());
        assert!(BinaryDataset::new(layout, 1, vec![vec![0, 1]], vec![0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let ds = toy();
        let s = ds.to_json().unwrap();
        assert!(s.contains("\"groups\":[[1,2]]"));
        assert_eq!(BinaryDataset::from_json(&s).unwrap(), ds);
        let bad = s.replace("\"n\":4", "\"n\":5");
        assert!(BinaryDataset::from_json(&bad).is_err());
    }

    #[test]
    fn full_sample_is_a_permutation() {
        let ds = toy();
        let s = sample_training_set(&ds, 4, 9).unwrap();
        assert_eq!(s.heldout.n(), 0);
        let mut idx = s.train_indices.clone();
        idx.sort();
        assert_eq!(idx, vec![0, 1, 2, 3]);
    }

    #[test]
    fn sampling_is_deterministic_and_disjoint() {
        let ds = toy();
        let a = sample_training_set(&ds, 2, 3).unwrap();
        let b = sample_training_set(&ds, 2, 3).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.heldout, b.heldout);
        assert_eq!(a.train.n() + a.heldout.n(), 4);
        assert!(sample_training_set(&ds, 5, 3).is_err());
    }
}
