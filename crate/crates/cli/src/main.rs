use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dprf_cli::config::resolve_output;
use dprf_cli::pipeline::{read_json, write_json};
use dprf_cli::tables::{noise_comparison, pmf_table, to_csv};
use dprf_cli::{evaluate_solution, run_sweep, solve, DatasetSource, ExactMode, ExperimentConfig, PrivateView, SolverConfig};
use dprf_core::evaluation::EvaluationOptions;
use dprf_core::reconstruction::{build_problem, CandidateSolution, KnownColumns, ThreatModel};
use dprf_core::rng::derive_seed;
use dprf_core::{sample_training_set, train_dp_forest, BinaryDataset, Forest, ForestParams, PrivacyBudget};

#[derive(Parser)]
#[command(name = "dprf", version, about = "Train DP random forests and attack them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Threat {
    Full,
    UnknownN,
    Partial,
    Informed,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a training set, train a forest, write the private and attacker views.
    Train {
        /// Experiment config to take the dataset from.
        #[arg(long, conflicts_with_all = ["csv", "encoding"])]
        config: Option<PathBuf>,
        #[arg(long, requires = "encoding")]
        csv: Option<PathBuf>,
        #[arg(long)]
        encoding: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        trees: usize,
        #[arg(long, default_value_t = 5)]
        depth: usize,
        /// Total budget; "inf" disables the noise.
        #[arg(long, default_value = "1")]
        epsilon: PrivacyBudget,
        #[arg(long, default_value_t = 100)]
        n_train: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct the training set from an attacker-view forest.
    Attack {
        #[arg(long)]
        forest: PathBuf,
        #[arg(long, value_enum, default_value = "full")]
        threat: Threat,
        /// Training set size (full threat model).
        #[arg(long)]
        n: Option<usize>,
        /// JSON file with {columns, values} (partial threat model).
        #[arg(long)]
        known_columns: Option<PathBuf>,
        /// Dataset JSON of the rows the adversary knows (informed threat model).
        #[arg(long)]
        known_rows: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 120.0)]
        time_budget: f64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, value_enum, default_value = "auto")]
        exact: ExactMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a solution against the private view.
    Evaluate {
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        private: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Append a one-line summary to this CSV.
        #[arg(long)]
        append_csv: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        random_runs: usize,
        #[arg(long, default_value_t = 100)]
        leak_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a full grid of experiments from a TOML config.
    Sweep {
        config: PathBuf,
        /// Override the number of concurrent grid cells.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the integer-noise pmf over [−γ, γ] as CSV.
    PmfDump {
        #[arg(long)]
        epsilon_v: f64,
    },
    /// Compare Laplace and Gaussian noise scales for a forest budget.
    NoiseCompare {
        #[arg(long, default_value_t = 10)]
        trees: usize,
        #[arg(long, default_value_t = 10.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-4)]
        delta: f64,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train {
            config,
            csv,
            encoding,
            trees,
            depth,
            epsilon,
            n_train,
            seed,
            out,
        } => {
            let source = match (config, csv, encoding) {
                (Some(c), _, _) => ExperimentConfig::from_file(&c)?.dataset,
                (None, Some(path), Some(encoding)) => DatasetSource::Csv { path, encoding },
                _ => bail!("give either --config or --csv with --encoding"),
            };
            train(source, trees, depth, epsilon, n_train, seed, &resolve_output(&out))
        }
        Command::Attack {
            forest,
            threat,
            n,
            known_columns,
            known_rows,
            alpha,
            time_budget,
            threads,
            exact,
            seed,
            out,
        } => {
            let view = Forest::load_json(&forest)?;
            if view.has_true_counts() {
                log::warn!("the forest carries true counts; the attack ignores them");
            }
            let threat = match threat {
                Threat::Full => ThreatModel::Full {
                    n: n.context("--n is required for the full threat model")?,
                },
                Threat::UnknownN => ThreatModel::UnknownN,
                Threat::Partial => ThreatModel::Partial {
                    known: read_json::<KnownColumns>(&known_columns.context("--known-columns is required")?)?,
                },
                Threat::Informed => ThreatModel::Informed {
                    known_rows: BinaryDataset::load_json(&known_rows.context("--known-rows is required")?)?,
                    alpha,
                },
            };
            let solver = SolverConfig {
                time_budget_s: time_budget,
                threads,
                exact,
                ..Default::default()
            };
            attack(&view.attacker_view(), threat, &solver, seed, &resolve_output(&out))
        }
        Command::Evaluate {
            solution,
            private,
            out,
            append_csv,
            random_runs,
            leak_samples,
            seed,
        } => {
            let opts = EvaluationOptions {
                random_runs,
                leak_samples,
                ..Default::default()
            };
            evaluate(&solution, &private, out.as_deref(), append_csv.as_deref(), &opts, seed)
        }
        Command::Sweep { config, workers } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let records = run_sweep(&cfg)?;
            let failed = records.iter().filter(|r| !r.is_ok()).count();
            println!(
                "{} runs ({} not ok); results in {}",
                records.len(),
                failed,
                cfg.output_root().display()
            );
            Ok(())
        }
        Command::PmfDump { epsilon_v } => {
            print!("{}", to_csv(&pmf_table(epsilon_v)?)?);
            Ok(())
        }
        Command::NoiseCompare { trees, epsilon, delta } => {
            print!("{}", to_csv(&noise_comparison(trees, epsilon, delta)?)?);
            Ok(())
        }
    }
}

fn train(
    source: DatasetSource,
    trees: usize,
    depth: usize,
    epsilon: PrivacyBudget,
    n_train: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let full = source.load()?;
    let sample_seed = derive_seed(seed, &[1]);
    let sample = sample_training_set(&full, n_train, sample_seed)?;
    let params = ForestParams {
        num_trees: trees,
        depth,
        epsilon,
    };
    let forest = train_dp_forest(&sample.train, &params, derive_seed(seed, &[2]))?;
    std::fs::create_dir_all(out)?;
    forest.attacker_view().save_json(&out.join("forest.json"))?;
    PrivateView {
        source,
        sample_seed,
        train_indices: sample.train_indices,
        train: sample.train,
        forest,
    }
    .save(&out.join("private.json"))?;
    println!("wrote {} and {}", out.join("forest.json").display(), out.join("private.json").display());
    Ok(())
}

fn attack(view: &Forest, threat: ThreatModel, solver: &SolverConfig, seed: u64, out: &Path) -> Result<()> {
    let problem = build_problem(view, threat)?;
    let (lo, hi) = problem.free_row_range();
    if lo != hi {
        println!("training-set size interval: [{lo}, {hi}]");
    }
    let result = solve(&problem, solver, seed)?;
    std::fs::create_dir_all(out)?;
    result.solution.save_json(&out.join("solution.json"))?;
    std::fs::write(out.join("trace.csv"), result.trace_csv()?)?;
    println!(
        "rows {}  objective {:.4}  hard-feasible {}  {} in {:.2}s",
        result.solution.n(),
        result.solution.objective,
        result.solution.hard_feasible,
        if result.exact { "exact" } else { "anytime" },
        result.wall_time_s
    );
    if !result.solution.hard_feasible {
        log::warn!("time budget exhausted before a hard-feasible reconstruction was found");
    }
    Ok(())
}

fn evaluate(
    solution: &Path,
    private: &Path,
    out: Option<&Path>,
    append_csv: Option<&Path>,
    opts: &EvaluationOptions,
    seed: u64,
) -> Result<()> {
    let sol = CandidateSolution::load_json(solution)?;
    let private = PrivateView::load(private)?;
    if sol.num_known_rows > 0 {
        bail!("informed-adversary solutions are scored per target by `dprf sweep`");
    }
    let forest = &private.forest;
    if sol.rows.first().is_some_and(|r| r.len() != forest.num_features()) {
        bail!("solution rows do not match the forest's attribute count");
    }
    let problem = build_problem(&forest.attacker_view(), ThreatModel::Full { n: sol.n() })?;
    let heldout = private.heldout()?;
    let heldout = (heldout.n() > 0).then_some(&heldout);
    let report = evaluate_solution(&problem, &sol, &private.train, heldout, Some(forest), opts, seed)?;
    match out {
        Some(p) => write_json(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    if let Some(csv) = append_csv {
        #[derive(serde::Serialize)]
        struct Row {
            num_trees: usize,
            depth: usize,
            epsilon: String,
            n_train: usize,
            reconstruction_error: f64,
            random_baseline_error: f64,
            proportion_perfect: f64,
            privacy_leak_cdf: Option<f64>,
        }
        let row = Row {
            num_trees: forest.num_trees(),
            depth: forest.depth(),
            epsilon: forest.epsilon_total().to_string(),
            n_train: private.train.n(),
            reconstruction_error: report.reconstruction_error,
            random_baseline_error: report.random_baseline_error,
            proportion_perfect: report.proportion_perfect,
            privacy_leak_cdf: report.privacy_leak_cdf(),
        };
        let exists = csv.exists() && std::fs::metadata(csv)?.len() > 0;
        let file = std::fs::OpenOptions::new().create(true).append(true).open(csv)?;
        let mut w = csv::WriterBuilder::new().has_headers(!exists).from_writer(file);
        w.serialize(row)?;
        w.flush()?;
    }
    Ok(())
}
