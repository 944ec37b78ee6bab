use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dprf_core::dataset::{generate_synthetic, load_csv, EncodingSpec, LabelRule, SyntheticSpec};
use dprf_core::evaluation::EvaluationOptions;
use dprf_core::rng::{derive_seed, key_hash};
use dprf_core::{BinaryDataset, PrivacyBudget};
use serde::{Deserialize, Serialize};

/// Relative output directories are resolved against this variable when set.
pub const OUTPUT_ROOT_ENV: &str = "DPRF_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// A CSV table and the TOML recipe that binarizes it.
    Csv { path: PathBuf, encoding: PathBuf },
    /// Rows drawn from a fixed synthetic model; `pool_size` rows form the
    /// population the training set is sampled from.
    Synthetic {
        m_features: usize,
        pool_size: usize,
        #[serde(default = "half")]
        class_balance: f64,
        #[serde(default)]
        group_layout: Vec<usize>,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        label_rule: LabelRule,
    },
}

fn half() -> f64 {
    0.5
}

impl DatasetSource {
    pub fn load(&self) -> Result<BinaryDataset> {
        match self {
            DatasetSource::Csv { path, encoding } => {
                let spec = EncodingSpec::from_toml_file(encoding)?;
                load_csv(path, &spec).with_context(|| format!("loading {}", path.display()))
            }
            DatasetSource::Synthetic {
                m_features,
                pool_size,
                class_balance,
                group_layout,
                seed,
                label_rule,
            } => Ok(generate_synthetic(&SyntheticSpec {
                m_features: *m_features,
                n_rows: *pool_size,
                class_balance: *class_balance,
                group_layout: group_layout.clone(),
                seed: *seed,
                label_rule: *label_rule,
            })?),
        }
    }

    /// Short name used in file names and result rows.
    pub fn label(&self) -> String {
        match self {
            DatasetSource::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "csv".into()),
            DatasetSource::Synthetic { m_features, .. } => format!("synthetic{m_features}"),
        }
    }

    fn resolve(&mut self, base: &Path) {
        if let DatasetSource::Csv { path, encoding } = self {
            *path = base.join(&*path);
            *encoding = base.join(&*encoding);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub num_trees: Vec<usize>,
    pub depth: Vec<usize>,
    pub epsilon: Vec<PrivacyBudget>,
    pub n_train: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThreatConfig {
    #[default]
    Full,
    UnknownN,
    /// These attribute columns are known for every training row.
    Partial { known_columns: Vec<usize> },
    /// One attack per target row, knowing all other training rows.
    Informed {
        targets: usize,
        #[serde(default)]
        alpha: Option<f64>,
    },
}

impl ThreatConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ThreatConfig::Full => "full",
            ThreatConfig::UnknownN => "unknown_n",
            ThreatConfig::Partial { .. } => "partial",
            ThreatConfig::Informed { .. } => "informed",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExactMode {
    /// Exhaustive search when the search space is under the ceiling.
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub time_budget_s: f64,
    pub threads: usize,
    pub restarts: usize,
    pub exact: ExactMode,
    pub exact_ceiling: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_budget_s: 120.0,
            threads: 1,
            restarts: 8,
            exact: ExactMode::Auto,
            exact_ceiling: 1e7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub dataset: DatasetSource,
    pub grid: Grid,
    #[serde(default)]
    pub threat: ThreatConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub evaluation: EvaluationOptions,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Grid cells run concurrently.
    #[serde(default = "one")]
    pub workers: usize,
}

fn default_name() -> String {
    "experiment".into()
}

fn one() -> usize {
    1
}

/// One point of the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub num_trees: usize,
    pub depth: usize,
    pub epsilon: PrivacyBudget,
    pub n_train: usize,
}

impl Cell {
    pub fn key(&self) -> String {
        format!("T{}_d{}_eps{}_n{}", self.num_trees, self.depth, self.epsilon, self.n_train)
    }
}

impl ExperimentConfig {
    /// Parses a TOML config. Relative dataset paths are taken relative to
    /// `base`, normally the directory holding the file.
    pub fn from_toml_str(s: &str, base: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(s).context("parsing experiment config")?;
        cfg.dataset.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&s, base)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.num_trees.is_empty() || g.depth.is_empty() || g.epsilon.is_empty() || g.n_train.is_empty() {
            bail!("every grid axis needs at least one value");
        }
        if g.num_trees.contains(&0) || g.depth.contains(&0) || g.n_train.contains(&0) {
            bail!("grid values for trees, depth and n_train must be positive");
        }
        if self.seeds.is_empty() {
            bail!("at least one seed is required");
        }
        if !(self.solver.time_budget_s > 0.0) || self.solver.threads == 0 || self.workers == 0 {
            bail!("time budget, threads and workers must be positive");
        }
        if let ThreatConfig::Informed { targets: 0, .. } = self.threat {
            bail!("informed mode needs at least one target");
        }
        Ok(())
    }

    /// Grid cells in axis order (trees, depth, ε, N).
    pub fn cells(&self) -> Vec<Cell> {
        let g = &self.grid;
        let mut out = Vec::new();
        for &num_trees in &g.num_trees {
            for &depth in &g.depth {
                for &epsilon in &g.epsilon {
                    for &n_train in &g.n_train {
                        out.push(Cell {
                            num_trees,
                            depth,
                            epsilon,
                            n_train,
                        });
                    }
                }
            }
        }
        out
    }

    /// Seed of one (cell, repetition). Depends only on the master seed, the
    /// cell coordinates and the repetition seed, so growing the grid leaves
    /// existing cells untouched.
    pub fn run_seed(&self, cell: &Cell, seed: u64) -> u64 {
        derive_seed(self.master_seed, &[key_hash(&cell.key()), key_hash(self.threat.name()), seed])
    }

    /// Output directory, under `$DPRF_OUTPUT_ROOT` when it is set and the
    /// configured path is relative.
    pub fn output_root(&self) -> PathBuf {
        resolve_output(&self.output_dir)
    }

    pub fn run_dir(&self, cell: &Cell, seed: u64) -> PathBuf {
        self.output_root()
            .join(format!("{}_{}", self.dataset.label(), self.threat.name()))
            .join(cell.key())
            .join(format!("seed{seed}"))
    }
}

pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if path.is_relative() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
name = "compas-table"
seeds = [1, 2]
output_dir = "runs/compas"

[dataset]
kind = "csv"
path = "compas.csv"
encoding = "compas.toml"

[grid]
num_trees = [1, 5]
depth = [3, 5]
epsilon = ["inf", 0.1, "30"]
n_train = [100]

[threat]
mode = "partial"
known_columns = [0, 1]

[solver]
time_budget_s = 60
"#;

    #[test]
    fn parses_and_expands() {
        let cfg = ExperimentConfig::from_toml_str(EXAMPLE, Path::new("/data")).unwrap();
        assert_eq!(cfg.cells().len(), 12);
        assert_eq!(cfg.grid.epsilon[0], PrivacyBudget::Infinite);
        assert_eq!(cfg.grid.epsilon[1], "0.1".parse().unwrap());
        assert_eq!(cfg.threat, ThreatConfig::Partial { known_columns: vec![0, 1] });
        assert_eq!(cfg.solver.restarts, 8);
        match &cfg.dataset {
            DatasetSource::Csv { path, .. } => assert_eq!(path, Path::new("/data/compas.csv")),
            _ => panic!(),
        }
    }

    #[test]
    fn cell_seeds_are_independent_of_the_grid() {
        let a = ExperimentConfig::from_toml_str(EXAMPLE, Path::new(".")).unwrap();
        let mut b = a.clone();
        b.grid.depth.push(7);
        let cell = a.cells()[3];
        assert_eq!(a.run_seed(&cell, 2), b.run_seed(&cell, 2));
        assert_ne!(a.run_seed(&cell, 1), a.run_seed(&cell, 2));
    }

    #[test]
    fn rejects_empty_axes() {
        let bad = EXAMPLE.replace("depth = [3, 5]", "depth = []");
        assert!(ExperimentConfig::from_toml_str(&bad, Path::new(".")).is_err());
        let bad = EXAMPLE.replace("seeds = [1, 2]", "seeds = []");
        assert!(ExperimentConfig::from_toml_str(&bad, Path::new(".")).is_err());
    }
}
