use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::path::Path;
use std::sync::Mutex;

use anyhow::{Context, Result};
use dprf_core::stats::{mean, std_dev};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::pipeline::{read_json, run_cell, write_json, RunRecord};

pub const RESULTS_CSV: &str = "results.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
const RECORD_FILE: &str = "record.json";

/// Mean and standard deviation of the successful runs of one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub dataset: String,
    pub threat: String,
    pub num_trees: usize,
    pub depth: usize,
    pub epsilon: String,
    pub n_train: usize,
    pub runs: usize,
    pub failed: usize,
    pub error_mean: f64,
    pub error_std: f64,
    pub random_baseline_mean: f64,
    pub majority_baseline_mean: Option<f64>,
    pub proportion_perfect_mean: f64,
    pub time_to_first_feasible_mean: Option<f64>,
    pub accuracy_train_mean: Option<f64>,
    pub accuracy_test_mean: Option<f64>,
    pub privacy_leak_cdf_mean: Option<f64>,
}

fn mean_of(records: &[&RunRecord], f: impl Fn(&RunRecord) -> Option<f64>) -> Option<f64> {
    let xs: Vec<f64> = records.iter().filter_map(|r| f(r)).collect();
    (!xs.is_empty()).then(|| mean(&xs))
}

/// Groups records by grid cell. Runs without an error value count as failed.
pub fn summarize(records: &[RunRecord]) -> Vec<CellSummary> {
    let mut groups: BTreeMap<(String, String, usize, usize, String, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.dataset.clone(), r.threat.clone(), r.num_trees, r.depth, r.epsilon.clone(), r.n_train);
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((dataset, threat, num_trees, depth, epsilon, n_train), rs)| {
            let ok: Vec<&RunRecord> = rs.iter().copied().filter(|r| r.reconstruction_error.is_some()).collect();
            let errors: Vec<f64> = ok.iter().filter_map(|r| r.reconstruction_error).collect();
            CellSummary {
                dataset,
                threat,
                num_trees,
                depth,
                epsilon,
                n_train,
                runs: ok.len(),
                failed: rs.len() - ok.len(),
                error_mean: mean(&errors),
                error_std: std_dev(&errors),
                random_baseline_mean: mean_of(&ok, |r| r.random_baseline_error).unwrap_or(f64::NAN),
                majority_baseline_mean: mean_of(&ok, |r| r.majority_baseline_error),
                proportion_perfect_mean: mean_of(&ok, |r| r.proportion_perfect).unwrap_or(f64::NAN),
                time_to_first_feasible_mean: mean_of(&ok, |r| r.time_to_first_feasible),
                accuracy_train_mean: mean_of(&ok, |r| r.accuracy_train),
                accuracy_test_mean: mean_of(&ok, |r| r.accuracy_test),
                privacy_leak_cdf_mean: mean_of(&ok, |r| r.privacy_leak_cdf),
            }
        })
        .collect()
}

fn append_record(path: &Path, record: &RunRecord) -> Result<()> {
    let exists = path.exists() && std::fs::metadata(path)?.len() > 0;
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut w = csv::WriterBuilder::new().has_headers(!exists).from_writer(file);
    w.serialize(record)?;
    w.flush()?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every (cell, seed) of the grid. Finished runs (those with a
/// `record.json`) are loaded instead of recomputed. New records are appended
/// to `results.csv` as they finish; `summary.csv` is rewritten at the end.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let root = cfg.output_root();
    std::fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
    write_json(&root.join("config.json"), cfg)?;
    let full = cfg.dataset.load()?;
    let jobs: Vec<_> = cfg
        .cells()
        .into_iter()
        .flat_map(|c| cfg.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results_path = root.join(RESULTS_CSV);
    let sink = Mutex::new(());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let records: Vec<RunRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|(cell, seed)| -> Result<RunRecord> {
                let dir = cfg.run_dir(cell, *seed);
                let done = dir.join(RECORD_FILE);
                if done.exists() {
                    log::info!("skipping {} seed {seed}: already done", cell.key());
                    return read_json(&done);
                }
                std::fs::create_dir_all(&dir)?;
                log::info!("running {} seed {seed}", cell.key());
                let record = run_cell(cfg, &full, cell, *seed, &dir).unwrap_or_else(|e| {
                    log::error!("{} seed {seed} failed: {e:#}", cell.key());
                    RunRecord {
                        dataset: cfg.dataset.label(),
                        threat: cfg.threat.name().into(),
                        num_trees: cell.num_trees,
                        depth: cell.depth,
                        epsilon: cell.epsilon.to_string(),
                        n_train: cell.n_train,
                        seed: *seed,
                        status: format!("error: {e:#}"),
                        ..Default::default()
                    }
                });
                write_json(&done, &record)?;
                let _guard = sink.lock().expect("results lock");
                append_record(&results_path, &record)?;
                Ok(record)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    write_csv(&root.join(SUMMARY_CSV), &summarize(&records))?;
    Ok(records)
}
