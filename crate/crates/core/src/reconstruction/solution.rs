use std::path::Path;

use serde::{Deserialize, Serialize};

use super::problem::{bits_to_row, Evaluation, ReconstructionProblem};
use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::noise::{DeltaVector, TailMode};

/// A full reconstruction: rows, labels, derived counts and their score.
/// In informed mode the known rows come first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSolution {
    pub rows: Vec<Vec<u8>>,
    pub labels: Vec<usize>,
    pub num_known_rows: usize,
    pub derived_counts: Vec<i64>,
    pub deltas: DeltaVector,
    pub objective: f64,
    pub log_likelihood: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularizer: Option<f64>,
    pub hard_feasible: bool,
}

impl CandidateSolution {
    /// Scores free rows under the hard noise bound and assembles a solution.
    pub fn from_free_rows(problem: &ReconstructionProblem, rows: &[u64], labels: &[usize]) -> Self {
        let ev: Evaluation = problem.evaluate(rows, labels, TailMode::Hard);
        let m = problem.num_features();
        let mut out_rows: Vec<Vec<u8>> = problem.known_rows().iter().map(|&(x, _)| bits_to_row(x, m)).collect();
        let mut out_labels: Vec<usize> = problem.known_rows().iter().map(|&(_, c)| c).collect();
        out_rows.extend(rows.iter().map(|&x| bits_to_row(x, m)));
        out_labels.extend_from_slice(labels);
        CandidateSolution {
            rows: out_rows,
            labels: out_labels,
            num_known_rows: problem.num_known_rows(),
            derived_counts: ev.derived_counts,
            deltas: ev.deltas,
            objective: ev.objective,
            log_likelihood: ev.log_likelihood,
            regularizer: ev.regularizer,
            hard_feasible: ev.hard_feasible,
        }
    }

    /// Ñ, including known rows.
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn free_rows(&self) -> &[Vec<u8>] {
        &self.rows[self.num_known_rows..]
    }

    pub fn free_labels(&self) -> &[usize] {
        &self.labels[self.num_known_rows..]
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

/// The reconstructed rows (known rows excluded) as a dataset, sorted by
/// (row, label) so the output depends only on the multiset.
pub fn extract_reconstruction(problem: &ReconstructionProblem, solution: &CandidateSolution) -> Result<BinaryDataset> {
    let mut pairs: Vec<(Vec<u8>, usize)> = solution
        .free_rows()
        .iter()
        .cloned()
        .zip(solution.free_labels().iter().copied())
        .collect();
    pairs.sort();
    let (rows, labels) = pairs.into_iter().unzip();
    BinaryDataset::new(problem.layout().clone(), problem.num_classes(), rows, labels)
}
