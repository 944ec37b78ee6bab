use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use dprf_core::evaluation::{
    align_unknown_n, evaluate, majority_baseline, random_baseline, row_error, EvaluationContext,
    EvaluationOptions, EvaluationReport,
};
use dprf_core::reconstruction::{
    build_problem, extract_reconstruction, solve_anytime, solve_exact, AnytimeConfig, CandidateSolution, ExactLimits,
    KnownColumns, ReconstructionProblem, ThreatModel, TracePoint,
};
use dprf_core::rng::derive_seed;
use dprf_core::{sample_training_set, train_dp_forest, BinaryDataset, CountMode, Error, Forest, ForestParams};
use serde::{Deserialize, Serialize};

use crate::config::{Cell, DatasetSource, ExactMode, ExperimentConfig, SolverConfig, ThreatConfig};

/// Everything needed to score an attack: the forest with its true counts and
/// the training sample. Never handed to the attack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivateView {
    pub source: DatasetSource,
    pub sample_seed: u64,
    pub train_indices: Vec<usize>,
    pub train: BinaryDataset,
    pub forest: Forest,
}

impl PrivateView {
    /// Rows of the source not used for training.
    pub fn heldout(&self) -> Result<BinaryDataset> {
        let full = self.source.load()?;
        let mut used = vec![false; full.n()];
        for &i in &self.train_indices {
            used[i] = true;
        }
        let rest: Vec<usize> = (0..full.n()).filter(|&i| !used[i]).collect();
        Ok(full.select(&rest))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let s = serde_json::to_string_pretty(value)?;
    std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let s = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&s).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub solution: CandidateSolution,
    pub trace: Vec<TracePoint>,
    pub time_to_first_feasible: Option<f64>,
    pub wall_time_s: f64,
    pub exact: bool,
}

impl SolveOutcome {
    pub fn trace_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &self.trace {
            w.serialize(p)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

/// Runs the exhaustive solver when allowed and small enough, the anytime
/// solver otherwise.
pub fn solve(problem: &ReconstructionProblem, solver: &SolverConfig, seed: u64) -> Result<SolveOutcome> {
    let start = Instant::now();
    if solver.exact != ExactMode::Never {
        match solve_exact(problem, &ExactLimits { ceiling: solver.exact_ceiling }) {
            Ok(solution) => {
                let t = start.elapsed().as_secs_f64();
                return Ok(SolveOutcome {
                    trace: vec![TracePoint {
                        time_s: t,
                        objective: solution.objective,
                        hard_feasible: solution.hard_feasible,
                    }],
                    time_to_first_feasible: Some(t),
                    wall_time_s: t,
                    exact: true,
                    solution,
                });
            }
            Err(Error::SearchSpaceTooLarge { .. }) if solver.exact == ExactMode::Auto => {}
            Err(Error::Infeasible) => bail!("no reconstruction satisfies the hard noise bounds (proven by exhaustive search)"),
            Err(e) => return Err(e.into()),
        }
    }
    let cfg = AnytimeConfig {
        time_budget: Duration::from_secs_f64(solver.time_budget_s),
        threads: solver.threads,
        restarts: solver.restarts,
        ..Default::default()
    };
    let r = solve_anytime(problem, &cfg, seed)?;
    Ok(SolveOutcome {
        solution: r.solution,
        trace: r.trace,
        time_to_first_feasible: r.time_to_first_feasible,
        wall_time_s: start.elapsed().as_secs_f64(),
        exact: false,
    })
}

/// Threat model for a whole-dataset attack on `train`.
pub fn threat_model(threat: &ThreatConfig, train: &BinaryDataset) -> Result<ThreatModel> {
    Ok(match threat {
        ThreatConfig::Full => ThreatModel::Full { n: train.n() },
        ThreatConfig::UnknownN => ThreatModel::UnknownN,
        ThreatConfig::Partial { known_columns } => ThreatModel::Partial {
            known: KnownColumns::from_dataset(train, known_columns.clone()),
        },
        ThreatConfig::Informed { .. } => bail!("informed attacks run per target row"),
    })
}

/// Scores a solution, padding or subsampling it to N rows first if needed.
pub fn evaluate_solution(
    problem: &ReconstructionProblem,
    solution: &CandidateSolution,
    train: &BinaryDataset,
    heldout: Option<&BinaryDataset>,
    forest: Option<&Forest>,
    options: &EvaluationOptions,
    seed: u64,
) -> Result<EvaluationReport> {
    let mut recon = extract_reconstruction(problem, solution)?;
    if recon.n() != train.n() {
        log::info!("aligning {} reconstructed rows to N = {}", recon.n(), train.n());
        recon = align_unknown_n(&recon, train.n(), derive_seed(seed, &[0xa1]))?;
    }
    let ctx = EvaluationContext {
        heldout,
        forest,
        known_rows: None,
    };
    Ok(evaluate(&recon, train, ctx, options, seed)?)
}

/// One row of the results table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub threat: String,
    pub num_trees: usize,
    pub depth: usize,
    pub epsilon: String,
    pub n_train: usize,
    pub seed: u64,
    pub status: String,
    pub reconstruction_error: Option<f64>,
    pub random_baseline_error: Option<f64>,
    pub majority_baseline_error: Option<f64>,
    pub proportion_perfect: Option<f64>,
    pub worst_individual_error: Option<f64>,
    pub n_reconstructed: Option<usize>,
    pub objective: Option<f64>,
    pub hard_feasible: Option<bool>,
    pub time_to_first_feasible: Option<f64>,
    pub wall_time_s: Option<f64>,
    pub accuracy_train: Option<f64>,
    pub accuracy_test: Option<f64>,
    pub privacy_leak_cdf: Option<f64>,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Per-target outcome of an informed attack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetResult {
    pub index: usize,
    pub error: f64,
    pub majority_error: f64,
    pub hard_feasible: bool,
}

/// Train → attack → evaluate for one (cell, seed), writing artifacts to `dir`.
pub fn run_cell(cfg: &ExperimentConfig, full: &BinaryDataset, cell: &Cell, seed: u64, dir: &Path) -> Result<RunRecord> {
    let run_seed = cfg.run_seed(cell, seed);
    let mut record = RunRecord {
        dataset: cfg.dataset.label(),
        threat: cfg.threat.name().into(),
        num_trees: cell.num_trees,
        depth: cell.depth,
        epsilon: cell.epsilon.to_string(),
        n_train: cell.n_train,
        seed,
        status: "ok".into(),
        ..Default::default()
    };
    let sample_seed = derive_seed(run_seed, &[1]);
    let sample = sample_training_set(full, cell.n_train, sample_seed)?;
    let params = ForestParams {
        num_trees: cell.num_trees,
        depth: cell.depth,
        epsilon: cell.epsilon,
    };
    let forest = train_dp_forest(&sample.train, &params, derive_seed(run_seed, &[2]))?;
    let view = forest.attacker_view();
    PrivateView {
        source: cfg.dataset.clone(),
        sample_seed,
        train_indices: sample.train_indices.clone(),
        train: sample.train.clone(),
        forest: forest.clone(),
    }
    .save(&dir.join("private.json"))?;
    std::fs::write(dir.join("forest.json"), view.to_json_pretty()?)?;
    record.accuracy_train = Some(forest.accuracy(&sample.train, CountMode::Noisy)?);
    if sample.heldout.n() > 0 {
        record.accuracy_test = Some(forest.accuracy(&sample.heldout, CountMode::Noisy)?);
    }
    let attack_seed = derive_seed(run_seed, &[3]);
    let eval_seed = derive_seed(run_seed, &[4]);
    let opts = &cfg.evaluation;

    if let ThreatConfig::Informed { targets, alpha } = &cfg.threat {
        let targets = (*targets).min(sample.train.n());
        if sample.train.n() < 2 {
            bail!("informed attacks need at least two training rows");
        }
        let mut results = Vec::with_capacity(targets);
        let mut random = 0.0;
        let (mut wall, mut obj) = (0.0, 0.0);
        let mut all_feasible = true;
        for i in 0..targets {
            let rest: Vec<usize> = (0..sample.train.n()).filter(|&k| k != i).collect();
            let known = sample.train.select(&rest);
            let target = sample.train.row(i);
            let problem = build_problem(
                &view,
                ThreatModel::Informed {
                    known_rows: known.clone(),
                    alpha: *alpha,
                },
            )?;
            let out = solve(&problem, &cfg.solver, derive_seed(attack_seed, &[i as u64]))?;
            let guess = &out.solution.free_rows()[0];
            results.push(TargetResult {
                index: i,
                error: row_error(guess, target),
                majority_error: row_error(&majority_baseline(&known)?, target),
                hard_feasible: out.solution.hard_feasible,
            });
            all_feasible &= out.solution.hard_feasible;
            wall += out.wall_time_s;
            obj += out.solution.objective;
            random += random_baseline(&sample.train.select(&[i]), opts.random_runs, derive_seed(eval_seed, &[i as u64]))?;
        }
        write_json(&dir.join("informed.json"), &results)?;
        let k = targets as f64;
        record.reconstruction_error = Some(results.iter().map(|r| r.error).sum::<f64>() / k);
        record.majority_baseline_error = Some(results.iter().map(|r| r.majority_error).sum::<f64>() / k);
        record.random_baseline_error = Some(random / k);
        record.proportion_perfect = Some(results.iter().filter(|r| r.error == 0.0).count() as f64 / k);
        record.worst_individual_error = results.iter().map(|r| r.error).reduce(f64::max);
        record.n_reconstructed = Some(targets);
        record.objective = Some(obj / k);
        record.hard_feasible = Some(all_feasible);
        record.wall_time_s = Some(wall);
        return Ok(record);
    }

    let problem = build_problem(&view, threat_model(&cfg.threat, &sample.train)?)?;
    let out = solve(&problem, &cfg.solver, attack_seed)?;
    std::fs::write(dir.join("solution.json"), out.solution.to_json()?)?;
    std::fs::write(dir.join("trace.csv"), out.trace_csv()?)?;
    let heldout = (sample.heldout.n() > 0).then_some(&sample.heldout);
    let report = evaluate_solution(&problem, &out.solution, &sample.train, heldout, Some(&forest), opts, eval_seed)?;
    write_json(&dir.join("report.json"), &report)?;

    record.reconstruction_error = Some(report.reconstruction_error);
    record.random_baseline_error = Some(report.random_baseline_error);
    record.proportion_perfect = Some(report.proportion_perfect);
    record.worst_individual_error = Some(report.worst_individual_error);
    record.n_reconstructed = Some(out.solution.n());
    record.objective = Some(out.solution.objective);
    record.hard_feasible = Some(out.solution.hard_feasible);
    record.time_to_first_feasible = out.time_to_first_feasible;
    record.wall_time_s = Some(out.wall_time_s);
    record.privacy_leak_cdf = report.privacy_leak_cdf();
    if !out.solution.hard_feasible {
        record.status = "no_feasible".into();
    }
    Ok(record)
}
