//! Experiment orchestration for DP random forest reconstruction attacks:
//! configuration, the train → attack → evaluate pipeline, grid sweeps and
//! the small noise tables.

pub mod config;
pub mod pipeline;
pub mod sweep;
pub mod tables;

pub use config::{Cell, DatasetSource, ExactMode, ExperimentConfig, Grid, SolverConfig, ThreatConfig, OUTPUT_ROOT_ENV};
pub use pipeline::{evaluate_solution, run_cell, solve, PrivateView, RunRecord, SolveOutcome, TargetResult};
pub use sweep::{run_sweep, summarize, CellSummary};
