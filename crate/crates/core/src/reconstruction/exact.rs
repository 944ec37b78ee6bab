//! Exhaustive solver for tiny instances. Rows are exchangeable, so it
//! enumerates multisets of (pattern, label) candidates per slot class (rows
//! sharing the same known attributes), scoring each by hard log-likelihood.

use std::collections::BTreeMap;

use super::problem::{row_to_bits, ReconstructionProblem};
use super::solution::CandidateSolution;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactLimits {
    /// Maximum of (#valid patterns · |C|)^Ñ for every Ñ tried.
    pub ceiling: f64,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits { ceiling: 1e7 }
    }
}

struct Candidate {
    bits: u64,
    label: usize,
    cells: Vec<usize>,
}

struct SlotClass {
    candidates: Vec<Candidate>,
    slots: usize,
    rows: Vec<usize>,
}

struct Search<'a> {
    problem: &'a ReconstructionProblem,
    classes: Vec<SlotClass>,
    counts: Vec<i64>,
    gamma: i64,
    /// cells with |Δ| > γ, and cells with Δ < −γ (cannot recover: counts only grow)
    out_of_domain: usize,
    overfull: usize,
    ll_sum: f64,
    reg: f64,
    chosen: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn cell_score(&self, i: usize) -> (f64, bool, bool) {
        let d = self.problem.noisy_counts()[i] - self.counts[i];
        if d.abs() <= self.gamma {
            (self.problem.noise().log_p(d, crate::noise::TailMode::Hard), false, false)
        } else {
            (0.0, true, d < -self.gamma)
        }
    }

    fn apply(&mut self, i: usize, step: i64) {
        let (s, ood, over) = self.cell_score(i);
        self.ll_sum -= s;
        self.out_of_domain -= usize::from(ood);
        self.overfull -= usize::from(over);
        self.counts[i] += step;
        let (s, ood, over) = self.cell_score(i);
        self.ll_sum += s;
        self.out_of_domain += usize::from(ood);
        self.overfull += usize::from(over);
    }

    fn push(&mut self, class: usize, cand: usize) {
        let cells = std::mem::take(&mut self.classes[class].candidates[cand].cells);
        for &i in &cells {
            self.apply(i, 1);
        }
        self.classes[class].candidates[cand].cells = cells;
        if self.problem.is_informed() {
            self.reg += self.problem.distance_to_known(self.classes[class].candidates[cand].bits);
        }
        self.chosen.push(cand);
    }

    fn pop(&mut self, class: usize) {
        let cand = self.chosen.pop().expect("pop after push");
        let cells = std::mem::take(&mut self.classes[class].candidates[cand].cells);
        for &i in &cells {
            self.apply(i, -1);
        }
        self.classes[class].candidates[cand].cells = cells;
        if self.problem.is_informed() {
            self.reg -= self.problem.distance_to_known(self.classes[class].candidates[cand].bits);
        }
    }

    fn objective(&self) -> f64 {
        let w = self.problem.ll_weight();
        let ll = if w == 0.0 { 0.0 } else { w * self.ll_sum };
        ll - self.problem.reg_weight() * self.reg
    }

    /// Fills slot `slot` of class `class` with candidates no smaller than `from`.
    fn dfs(&mut self, class: usize, slot: usize, from: usize) {
        if self.overfull > 0 {
            return;
        }
        if class == self.classes.len() {
            if self.out_of_domain == 0 {
                let obj = self.objective();
                if self.best.as_ref().is_none_or(|(b, _)| obj > b + 1e-9) {
                    self.best = Some((obj, self.chosen.clone()));
                }
            }
            return;
        }
        if slot == self.classes[class].slots {
            self.dfs(class + 1, 0, 0);
            return;
        }
        for cand in from..self.classes[class].candidates.len() {
            self.push(class, cand);
            self.dfs(class, slot + 1, cand);
            self.pop(class);
        }
    }
}

/// Certified optimum under the hard noise bound. Ties resolve to the
/// lexicographically smallest sorted (row, label) sequence, and in the
/// unknown-N case to the smallest Ñ.
pub fn solve_exact(problem: &ReconstructionProblem, limits: &ExactLimits) -> Result<CandidateSolution> {
    let layout = problem.layout();
    let c = problem.num_classes();
    let (lo, hi) = problem.free_row_range();
    let per_row = layout.num_valid_rows() * c as f64;
    let worst = per_row.powi(hi as i32);
    if worst > limits.ceiling {
        return Err(Error::SearchSpaceTooLarge {
            size: worst,
            ceiling: limits.ceiling,
        });
    }
    let patterns: Vec<u64> = layout.valid_rows().iter().map(|r| row_to_bits(r)).collect();
    let cells = problem.cells();
    let mut leaves = vec![0u32; problem.num_trees()];
    let make_candidates = |mask: u64, val: u64, leaves: &mut Vec<u32>| -> Vec<Candidate> {
        let mut out = Vec::new();
        for &x in patterns.iter().filter(|&&x| x & mask == val) {
            problem.route_all(x, leaves);
            for label in 0..c {
                out.push(Candidate {
                    bits: x,
                    label,
                    cells: leaves.iter().enumerate().map(|(t, &l)| cells.index(t, l as usize, label)).collect(),
                });
            }
        }
        out
    };

    let mut best: Option<(f64, Vec<u64>, Vec<usize>)> = None;
    for n_free in lo..=hi {
        // rows with identical known attributes are interchangeable
        let mut by_key: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
        for k in 0..n_free {
            by_key.entry(problem.row_fixed(k)).or_default().push(k);
        }
        let classes: Vec<SlotClass> = by_key
            .into_iter()
            .map(|((mask, val), rows)| SlotClass {
                candidates: make_candidates(mask, val, &mut leaves),
                slots: rows.len(),
                rows,
            })
            .collect();
        let gamma = problem.noise().gamma();
        let mut search = Search {
            problem,
            classes,
            counts: problem.base_counts().to_vec(),
            gamma,
            out_of_domain: 0,
            overfull: 0,
            ll_sum: 0.0,
            reg: 0.0,
            chosen: Vec::new(),
            best: None,
        };
        for i in 0..search.counts.len() {
            let (s, ood, over) = search.cell_score(i);
            search.ll_sum += s;
            search.out_of_domain += usize::from(ood);
            search.overfull += usize::from(over);
        }
        search.dfs(0, 0, 0);
        if let Some((obj, chosen)) = search.best {
            if best.as_ref().is_none_or(|(b, _, _)| obj > b + 1e-9) {
                let mut rows = vec![0u64; n_free];
                let mut labels = vec![0usize; n_free];
                let mut it = chosen.into_iter();
                for class in &search.classes {
                    for &k in &class.rows {
                        let cand = &class.candidates[it.next().expect("one choice per slot")];
                        rows[k] = cand.bits;
                        labels[k] = cand.label;
                    }
                }
                best = Some((obj, rows, labels));
            }
        }
    }
    match best {
        Some((_, rows, labels)) => Ok(CandidateSolution::from_free_rows(problem, &rows, &labels)),
        None => Err(Error::Infeasible),
    }
}
