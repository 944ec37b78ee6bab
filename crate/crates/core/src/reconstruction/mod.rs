//! The reconstruction problem and its two solvers: an exhaustive oracle for
//! tiny instances and an anytime annealing search for realistic ones.

mod anytime;
mod checker;
mod exact;
mod interval;
mod problem;
mod solution;

pub use anytime::{solve_anytime, AnytimeConfig, AnytimeResult, MoveWeights, TracePoint};
pub use checker::{check_solution, CheckReport};
pub use exact::{solve_exact, ExactLimits};
pub use interval::{estimate_n_interval, NInterval};
pub use problem::{
    bits_to_row, build_problem, row_to_bits, Evaluation, KnownColumns, NKnowledge, ReconstructionProblem, ThreatModel,
};
pub use solution::{extract_reconstruction, CandidateSolution};
