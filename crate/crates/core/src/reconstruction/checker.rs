//! Independent validation of a candidate solution against the raw forest.
//! Routing goes through the uncompiled trees and leaf predicates, and the
//! likelihood through the closed-form pmf, so the solver's fast paths are not
//! trusted here.

use super::problem::{NKnowledge, ReconstructionProblem, ThreatModel};
use super::solution::CandidateSolution;
use crate::noise::{gamma_bound, log_noise_pmf};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckReport {
    pub violations: Vec<String>,
}

impl CheckReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_solution(problem: &ReconstructionProblem, sol: &CandidateSolution) -> CheckReport {
    let mut v = Vec::new();
    let forest = problem.forest();
    let layout = forest.layout();
    let m = forest.num_features();
    let c = forest.num_classes();
    let n = sol.rows.len();

    if sol.labels.len() != n {
        v.push(format!("{n} rows but {} labels", sol.labels.len()));
        return CheckReport { violations: v };
    }
    for (k, row) in sol.rows.iter().enumerate() {
        if row.len() != m || !layout.is_valid_row(row) {
            v.push(format!("row {k} is not a valid one-hot row of length {m}"));
        }
        if sol.labels[k] >= c {
            v.push(format!("row {k} has label {} >= {c}", sol.labels[k]));
        }
    }
    if !v.is_empty() {
        return CheckReport { violations: v };
    }

    let cells = forest.cell_layout();
    let mut counts = vec![0i64; cells.len()];
    for (k, row) in sol.rows.iter().enumerate() {
        for (t, tree) in forest.trees().iter().enumerate() {
            let matching: Vec<usize> = (0..tree.num_leaves())
                .filter(|&l| tree.leaf_predicate(l).matches(row))
                .collect();
            if matching.len() != 1 || matching[0] != tree.route(row) {
                v.push(format!("row {k} satisfies leaves {matching:?} of tree {t}"));
                continue;
            }
            counts[cells.index(t, matching[0], sol.labels[k])] += 1;
        }
    }
    if counts != sol.derived_counts {
        v.push("derived counts differ from a recount by routing".into());
    }
    for t in 0..forest.num_trees() {
        let total: i64 = counts[cells.tree_range(t)].iter().sum();
        if total != n as i64 {
            v.push(format!("tree {t} counts {total} rows, solution has {n}"));
        }
    }

    let noisy = forest.noisy_counts_flat();
    let deltas: Vec<i64> = noisy.iter().zip(&counts).map(|(a, b)| a - b).collect();
    if deltas != sol.deltas.0 {
        v.push("deltas are not noisy minus derived counts".into());
    }

    let eps_v = forest.epsilon_per_leaf().finite_f64();
    let gamma = match eps_v {
        Some(e) => gamma_bound(e).unwrap_or(i64::MAX),
        None => 0,
    };
    let in_domain = deltas.iter().all(|d| d.abs() <= gamma)
        && noisy
            .iter()
            .zip(&counts)
            .all(|(&ns, &nd)| nd >= (ns - gamma).max(0) && nd <= ns + gamma);
    if in_domain != sol.hard_feasible {
        v.push(format!("hard_feasible is {} but the domain check gives {in_domain}", sol.hard_feasible));
    }

    match (problem.threat(), problem.n_knowledge()) {
        (ThreatModel::Full { n: want }, _) if n != *want => v.push(format!("expected {want} rows, got {n}")),
        (ThreatModel::UnknownN, NKnowledge::Interval(iv)) if n < iv.n_min || n > iv.n_max => {
            v.push(format!("{n} rows outside the interval [{}, {}]", iv.n_min, iv.n_max))
        }
        (ThreatModel::Partial { known }, _) => {
            if n != known.values.len() {
                v.push(format!("expected {} rows, got {n}", known.values.len()));
            }
            for (k, vals) in known.values.iter().enumerate().take(n) {
                if known.columns.iter().zip(vals).any(|(&a, &b)| sol.rows[k][a] != b) {
                    v.push(format!("row {k} contradicts its known columns"));
                }
            }
        }
        (ThreatModel::Informed { known_rows, .. }, _) => {
            if n != known_rows.n() + 1 || sol.num_known_rows != known_rows.n() {
                v.push(format!("expected {} known rows plus one, got {n}", known_rows.n()));
            } else if sol.rows[..known_rows.n()] != known_rows.rows()[..] || sol.labels[..known_rows.n()] != known_rows.labels()[..] {
                v.push("known rows were altered".into());
            }
        }
        _ => {}
    }

    if sol.hard_feasible {
        let ll: f64 = deltas
            .iter()
            .map(|&d| match eps_v {
                Some(e) => log_noise_pmf(e, d),
                None => 0.0,
            })
            .sum();
        let tol = 1e-7 * ll.abs().max(1.0);
        if (ll - sol.log_likelihood).abs() > tol {
            v.push(format!("log-likelihood {} differs from recomputed {ll}", sol.log_likelihood));
        }
        let objective = match problem.alpha() {
            None => ll,
            Some(alpha) => {
                let known = sol.num_known_rows;
                let mut dist = 0usize;
                for free in &sol.rows[known..] {
                    for other in &sol.rows[..known] {
                        dist += free.iter().zip(other).filter(|(a, b)| a != b).count();
                    }
                }
                if sol.regularizer != Some(dist as f64) {
                    v.push(format!("regularizer {:?} differs from Manhattan sum {dist}", sol.regularizer));
                }
                alpha * ll / cells.len() as f64 - dist as f64 / known as f64
            }
        };
        if (objective - sol.objective).abs() > 1e-7 * objective.abs().max(1.0) {
            v.push(format!("objective {} differs from recomputed {objective}", sol.objective));
        }
    } else if sol.log_likelihood != f64::NEG_INFINITY {
        v.push("a hard-infeasible solution must report log-likelihood -inf".into());
    }

    CheckReport { violations: v }
}
