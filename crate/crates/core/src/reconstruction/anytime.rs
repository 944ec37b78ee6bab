//! Anytime heuristic: greedy construction followed by simulated annealing
//! over row edits, with restarts. Every move is scored by updating only the
//! (tree, leaf, class) cells it touches. The search uses the soft noise tail;
//! the reported solution is rescored under the hard bound.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use super::problem::ReconstructionProblem;
use super::solution::CandidateSolution;
use crate::error::Result;
use crate::noise::TailMode;
use crate::rng::{rng_from, Rng};

/// Relative frequencies of the move types.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MoveWeights {
    pub flip: f64,
    pub swap: f64,
    pub relabel: f64,
    pub targeted: f64,
    pub reinsert: f64,
    /// Add or remove a row (only when N is not known).
    pub resize: f64,
}

impl Default for MoveWeights {
    fn default() -> Self {
        MoveWeights {
            flip: 0.25,
            swap: 0.10,
            relabel: 0.10,
            targeted: 0.35,
            reinsert: 0.15,
            resize: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnytimeConfig {
    #[serde(with = "secs")]
    pub time_budget: Duration,
    pub threads: usize,
    pub restarts: usize,
    /// Temperature multiplier applied after each batch of moves.
    pub cooling: f64,
    /// Moves per temperature step; defaults to max(Ñ, 50).
    pub moves_per_batch: Option<usize>,
    /// Final temperature as a fraction of the calibrated initial one.
    pub final_temperature_ratio: f64,
    pub weights: MoveWeights,
}

impl Default for AnytimeConfig {
    fn default() -> Self {
        AnytimeConfig {
            time_budget: Duration::from_secs(120),
            threads: 1,
            restarts: 8,
            cooling: 0.999,
            moves_per_batch: None,
            final_temperature_ratio: 1e-3,
            weights: MoveWeights::default(),
        }
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let x = f64::deserialize(d)?;
        Duration::try_from_secs_f64(x).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub time_s: f64,
    pub objective: f64,
    pub hard_feasible: bool,
}

#[derive(Clone, Debug)]
pub struct AnytimeResult {
    pub solution: CandidateSolution,
    /// Improvements of the incumbent over time (soft objective).
    pub trace: Vec<TracePoint>,
    pub time_to_first_feasible: Option<f64>,
    pub restarts_completed: usize,
    pub moves: u64,
    /// The incumbent reached the likelihood upper bound (every Δ = 0).
    pub proven_optimal: bool,
    pub timed_out: bool,
}

impl AnytimeResult {
    pub fn trace_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &self.trace {
            w.serialize(p)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::error::Error::param(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Incumbent ordering: hard-feasible beats infeasible, then objective.
fn better(a: (bool, f64), b: (bool, f64)) -> bool {
    a.0 && !b.0 || (a.0 == b.0 && a.1 > b.1 + 1e-12)
}

enum Proposal {
    Modify { k: usize, x: u64, c: usize },
    Add { x: u64, c: usize },
    Remove { k: usize },
}

struct Worker<'a> {
    p: &'a ReconstructionProblem,
    rng: Rng,
    weights: MoveWeights,
    nt: usize,
    lo: usize,
    hi: usize,
    rows: Vec<u64>,
    labels: Vec<usize>,
    /// leaves[k * nt + t]
    leaves: Vec<u32>,
    counts: Vec<i64>,
    cell_score: f64,
    out_of_domain: usize,
    nonzero: usize,
    reg: f64,
    new_leaves: Vec<u32>,
    changes: Vec<(usize, i64)>,
    tree_order: Vec<usize>,
}

impl<'a> Worker<'a> {
    fn new(p: &'a ReconstructionProblem, seed: u64, weights: MoveWeights) -> Self {
        let (lo, hi) = p.free_row_range();
        let nt = p.num_trees();
        let mut w = Worker {
            p,
            rng: rng_from(seed, &[0x616e_7974]),
            weights,
            nt,
            lo,
            hi,
            rows: Vec::new(),
            labels: Vec::new(),
            leaves: Vec::new(),
            counts: Vec::new(),
            cell_score: 0.0,
            out_of_domain: 0,
            nonzero: 0,
            reg: 0.0,
            new_leaves: vec![0; nt],
            changes: Vec::with_capacity(2 * nt),
            tree_order: (0..nt).collect(),
        };
        w.reset_counts();
        w
    }

    #[inline]
    fn f(&self, delta: i64) -> f64 {
        self.p.noise().log_p(delta, TailMode::Soft)
    }

    fn reset_counts(&mut self) {
        self.counts = self.p.base_counts().to_vec();
        let c = self.p.cells();
        for (k, (&x, &label)) in self.rows.iter().zip(&self.labels).enumerate() {
            for t in 0..self.nt {
                let l = self.p.trees[t].route(x);
                self.leaves[k * self.nt + t] = l;
                self.counts[c.index(t, l as usize, label)] += 1;
            }
        }
        self.rescore();
    }

    fn rescore(&mut self) {
        let noisy = self.p.noisy_counts();
        let gamma = self.p.noise().gamma();
        self.cell_score = 0.0;
        self.out_of_domain = 0;
        self.nonzero = 0;
        for (i, &n) in noisy.iter().enumerate() {
            let d = n - self.counts[i];
            self.cell_score += self.f(d);
            self.out_of_domain += usize::from(d.abs() > gamma);
            self.nonzero += usize::from(d != 0);
        }
        self.reg = self.rows.iter().map(|&x| self.p.distance_to_known(x)).sum();
    }

    fn objective(&self) -> f64 {
        self.p.ll_weight() * self.cell_score - self.p.reg_weight() * self.reg
    }

    fn key(&self) -> (bool, f64) {
        (self.out_of_domain == 0, self.objective())
    }

    fn n(&self) -> usize {
        self.rows.len()
    }

    /// Cell score change of the pending `changes`.
    fn changes_delta(&self) -> f64 {
        let noisy = self.p.noisy_counts();
        let mut d = 0.0;
        for &(i, step) in &self.changes {
            let before = noisy[i] - self.counts[i];
            d += self.f(before - step) - self.f(before);
        }
        d
    }

    fn apply_changes(&mut self) {
        let noisy = self.p.noisy_counts();
        let gamma = self.p.noise().gamma();
        for &(i, step) in &self.changes {
            let before = noisy[i] - self.counts[i];
            let after = before - step;
            self.cell_score += self.f(after) - self.f(before);
            self.out_of_domain = self.out_of_domain + usize::from(after.abs() > gamma) - usize::from(before.abs() > gamma);
            self.nonzero = self.nonzero + usize::from(after != 0) - usize::from(before != 0);
            self.counts[i] += step;
        }
    }

    fn route_new(&mut self, x: u64) {
        for t in 0..self.nt {
            self.new_leaves[t] = self.p.trees[t].route(x);
        }
    }

    /// Fills `changes` for the proposal; `new_leaves` must hold the routing
    /// of the new row for Modify and Add.
    fn stage(&mut self, prop: &Proposal) {
        self.changes.clear();
        let c = self.p.cells();
        match *prop {
            Proposal::Modify { k, c: label, .. } => {
                let old = self.labels[k];
                for t in 0..self.nt {
                    let i0 = c.index(t, self.leaves[k * self.nt + t] as usize, old);
                    let i1 = c.index(t, self.new_leaves[t] as usize, label);
                    if i0 != i1 {
                        self.changes.push((i0, -1));
                        self.changes.push((i1, 1));
                    }
                }
            }
            Proposal::Add { c: label, .. } => {
                for t in 0..self.nt {
                    self.changes.push((c.index(t, self.new_leaves[t] as usize, label), 1));
                }
            }
            Proposal::Remove { k } => {
                for t in 0..self.nt {
                    self.changes.push((c.index(t, self.leaves[k * self.nt + t] as usize, self.labels[k]), -1));
                }
            }
        }
    }

    /// Objective change of a staged proposal.
    fn proposal_delta(&self, prop: &Proposal) -> f64 {
        let ll = self.p.ll_weight() * self.changes_delta();
        if !self.p.is_informed() {
            return ll;
        }
        let dreg = match *prop {
            Proposal::Modify { k, x, .. } => self.p.distance_to_known(x) - self.p.distance_to_known(self.rows[k]),
            Proposal::Add { x, .. } => self.p.distance_to_known(x),
            Proposal::Remove { k } => -self.p.distance_to_known(self.rows[k]),
        };
        ll - self.p.reg_weight() * dreg
    }

    fn commit(&mut self, prop: Proposal) {
        self.apply_changes();
        match prop {
            Proposal::Modify { k, x, c } => {
                self.reg += self.p.distance_to_known(x) - self.p.distance_to_known(self.rows[k]);
                self.rows[k] = x;
                self.labels[k] = c;
                self.leaves[k * self.nt..(k + 1) * self.nt].copy_from_slice(&self.new_leaves);
            }
            Proposal::Add { x, c } => {
                self.reg += self.p.distance_to_known(x);
                self.rows.push(x);
                self.labels.push(c);
                self.leaves.extend_from_slice(&self.new_leaves);
            }
            Proposal::Remove { k } => {
                self.reg -= self.p.distance_to_known(self.rows[k]);
                let last = self.n() - 1;
                self.rows.swap_remove(k);
                self.labels.swap_remove(k);
                for t in 0..self.nt {
                    self.leaves[k * self.nt + t] = self.leaves[last * self.nt + t];
                }
                self.leaves.truncate(last * self.nt);
            }
        }
    }

    /// Greedy row: choose a label, then walk the trees in random order taking
    /// the compatible leaf whose cell is most under-filled. Unconstrained
    /// attributes end at 0, unconstrained groups at their lowest open member.
    fn build_row(&mut self, fixed: (u64, u64), label: Option<usize>, jitter: f64) -> (u64, usize) {
        let cl = self.p.cells();
        let noisy = self.p.noisy_counts();
        let nc = self.p.num_classes();
        let resid = |i: usize| (noisy[i] - self.counts[i]) as f64;
        let label = label.unwrap_or_else(|| {
            let mut best = (f64::NEG_INFINITY, 0);
            for c in 0..nc {
                let mut s = 0.0;
                for t in 0..self.nt {
                    let mut m = f64::NEG_INFINITY;
                    for v in 0..self.p.trees[t].predicates.len() {
                        m = m.max(resid(cl.index(t, v, c)));
                    }
                    s += m;
                }
                s += jitter * self.nt as f64 * self.rng.random::<f64>();
                if s > best.0 {
                    best = (s, c);
                }
            }
            best.1
        });

        let (mask, val) = fixed;
        let mut ones = val;
        let mut zeros = mask & !val;
        self.tree_order.shuffle(&mut self.rng);
        for oi in 0..self.nt {
            let t = self.tree_order[oi];
            let mut best: Option<(f64, u64, u64)> = None;
            for (v, &(pos, neg)) in self.p.trees[t].predicates.iter().enumerate() {
                if !self.compatible(ones, zeros, pos, neg) {
                    continue;
                }
                let s = resid(cl.index(t, v, label)) + jitter * self.rng.random::<f64>();
                if best.is_none_or(|b| s > b.0) {
                    best = Some((s, pos, neg));
                }
            }
            let (_, pos, neg) = best.expect("a completable partial row is compatible with some leaf");
            ones |= pos;
            zeros |= neg;
        }
        (self.complete(ones, zeros), label)
    }

    #[inline]
    fn compatible(&self, ones: u64, zeros: u64, pos: u64, neg: u64) -> bool {
        if pos & zeros != 0 || neg & ones != 0 {
            return false;
        }
        let (o, z) = (ones | pos, zeros | neg);
        self.p.group_masks.iter().all(|&g| (o & g).count_ones() <= 1 && z & g != g)
    }

    fn complete(&self, ones: u64, zeros: u64) -> u64 {
        let mut x = ones;
        for &g in &self.p.group_masks {
            if x & g == 0 {
                let open = g & !zeros;
                x |= open & open.wrapping_neg();
            }
        }
        x
    }

    fn greedy_init(&mut self, n: usize, jitter: f64) {
        self.rows.clear();
        self.labels.clear();
        self.leaves.clear();
        self.reset_counts();
        for k in 0..n {
            let (x, c) = self.build_row(self.p.row_fixed(k), None, jitter);
            self.route_new(x);
            let prop = Proposal::Add { x, c };
            self.stage(&prop);
            self.commit(prop);
        }
    }

    fn load(&mut self, rows: &[u64], labels: &[usize]) {
        self.rows = rows.to_vec();
        self.labels = labels.to_vec();
        self.leaves = vec![0; rows.len() * self.nt];
        self.reset_counts();
    }

    fn random_row_index(&mut self) -> usize {
        self.rng.random_range(0..self.n())
    }

    fn propose(&mut self) -> Option<Proposal> {
        let w = self.weights;
        let resize = if self.lo < self.hi { w.resize } else { 0.0 };
        let swap = if self.p.group_masks.is_empty() { 0.0 } else { w.swap };
        let total = w.flip + swap + w.relabel + w.targeted + w.reinsert + resize;
        let mut r = self.rng.random::<f64>() * total;
        let (flip, relabel, targeted, reinsert) = (w.flip, w.relabel, w.targeted, w.reinsert);
        if self.n() == 0 {
            return self.propose_add();
        }
        if r < flip {
            return self.propose_flip();
        }
        r -= flip;
        if r < swap {
            return self.propose_swap();
        }
        r -= swap;
        if r < relabel {
            return self.propose_relabel();
        }
        r -= relabel;
        if r < targeted {
            return self.propose_targeted();
        }
        r -= targeted;
        if r < reinsert {
            return self.propose_reinsert();
        }
        if self.rng.random_bool(0.5) {
            self.propose_add()
        } else {
            self.propose_remove()
        }
    }

    fn propose_flip(&mut self) -> Option<Proposal> {
        let k = self.random_row_index();
        let open = self.p.free_mask & !self.p.row_fixed(k).0;
        if open == 0 {
            return None;
        }
        let a = nth_set_bit(open, self.rng.random_range(0..open.count_ones()));
        let x = self.rows[k] ^ (1 << a);
        self.route_new(x);
        Some(Proposal::Modify { k, x, c: self.labels[k] })
    }

    fn propose_swap(&mut self) -> Option<Proposal> {
        let k = self.random_row_index();
        let g = self.p.group_masks[self.rng.random_range(0..self.p.group_masks.len())];
        let fixed = self.p.row_fixed(k).0;
        let x = self.rows[k];
        if x & g & fixed != 0 {
            return None;
        }
        let open = g & !fixed & !x;
        if open == 0 {
            return None;
        }
        let b = nth_set_bit(open, self.rng.random_range(0..open.count_ones()));
        let x = (x & !g) | (1 << b);
        self.route_new(x);
        Some(Proposal::Modify { k, x, c: self.labels[k] })
    }

    fn propose_relabel(&mut self) -> Option<Proposal> {
        let nc = self.p.num_classes();
        let k = self.random_row_index();
        let c = (self.labels[k] + self.rng.random_range(1..nc)) % nc;
        let x = self.rows[k];
        self.new_leaves.copy_from_slice(&self.leaves[k * self.nt..(k + 1) * self.nt]);
        Some(Proposal::Modify { k, x, c })
    }

    /// Moves a row from an over-filled cell into an under-filled one of the
    /// same tree by rewriting it to satisfy the target leaf's path.
    fn propose_targeted(&mut self) -> Option<Proposal> {
        let cl = self.p.cells();
        let noisy = self.p.noisy_counts();
        let t = self.rng.random_range(0..self.nt);
        let range = cl.tree_range(t);
        let nc = self.p.num_classes();
        let mut target: Option<(i64, usize)> = None;
        for _ in 0..6 {
            let i = self.rng.random_range(range.clone());
            let d = noisy[i] - self.counts[i];
            if target.is_none_or(|b| d > b.0) {
                target = Some((d, i));
            }
        }
        let (d, i) = target?;
        if d <= 0 {
            return self.propose_flip();
        }
        let (v, c) = ((i - range.start) / nc, (i - range.start) % nc);
        let mut pick: Option<(i64, usize)> = None;
        for _ in 0..6 {
            let k = self.random_row_index();
            let cur = cl.index(t, self.leaves[k * self.nt + t] as usize, self.labels[k]);
            if cur == i {
                continue;
            }
            let dk = noisy[cur] - self.counts[cur];
            if pick.is_none_or(|b| dk < b.0) {
                pick = Some((dk, k));
            }
        }
        let (_, k) = pick?;
        let (pos, neg) = self.p.trees[t].predicates[v];
        let mut x = (self.rows[k] | pos) & !neg;
        for &g in &self.p.group_masks {
            if pos & g != 0 {
                x = (x & !g) | (pos & g);
            } else if x & g == 0 {
                let open = g & !neg & !self.p.row_fixed(k).0;
                if open == 0 {
                    return None;
                }
                x |= 1 << nth_set_bit(open, self.rng.random_range(0..open.count_ones()));
            }
        }
        if !self.p.row_allowed(k, x) {
            return None;
        }
        self.route_new(x);
        Some(Proposal::Modify { k, x, c })
    }

    /// Rebuilds one row greedily against the residuals left by the others.
    fn propose_reinsert(&mut self) -> Option<Proposal> {
        let k = self.random_row_index();
        let remove = Proposal::Remove { k };
        self.stage(&remove);
        for ch in &mut self.changes {
            self.counts[ch.0] += ch.1;
        }
        let (x, c) = self.build_row(self.p.row_fixed(k), None, 1.0);
        self.stage(&remove);
        for ch in &mut self.changes {
            self.counts[ch.0] -= ch.1;
        }
        self.route_new(x);
        Some(Proposal::Modify { k, x, c })
    }

    fn propose_add(&mut self) -> Option<Proposal> {
        if self.n() >= self.hi {
            return None;
        }
        let (x, c) = self.build_row((0, 0), None, 1.0);
        self.route_new(x);
        Some(Proposal::Add { x, c })
    }

    fn propose_remove(&mut self) -> Option<Proposal> {
        if self.n() <= self.lo || self.n() == 0 {
            return None;
        }
        let mut best: Option<(f64, usize)> = None;
        for _ in 0..4 {
            let k = self.random_row_index();
            let prop = Proposal::Remove { k };
            self.stage(&prop);
            let d = self.proposal_delta(&prop);
            if best.is_none_or(|b| d > b.0) {
                best = Some((d, k));
            }
        }
        best.map(|(_, k)| Proposal::Remove { k })
    }
}

fn nth_set_bit(mut m: u64, n: u32) -> u32 {
    for _ in 0..n {
        m &= m - 1;
    }
    m.trailing_zeros()
}

struct Outcome {
    rows: Vec<u64>,
    labels: Vec<usize>,
    key: (bool, f64),
    trace: Vec<TracePoint>,
    first_feasible: Option<f64>,
    restarts_completed: usize,
    moves: u64,
    proven: bool,
    timed_out: bool,
}

/// Mean magnitude of worsening moves from the current state.
fn calibrate(w: &mut Worker<'_>) -> f64 {
    let (mut sum, mut cnt) = (0.0, 0usize);
    for _ in 0..200 {
        if let Some(prop) = w.propose() {
            w.stage(&prop);
            let d = w.proposal_delta(&prop);
            if d < 0.0 && d.is_finite() {
                sum -= d;
                cnt += 1;
            }
        }
    }
    if cnt == 0 {
        (w.p.noise().tail_slope() * w.p.ll_weight()).max(1e-6)
    } else {
        sum / cnt as f64
    }
}

fn run_worker(p: &ReconstructionProblem, cfg: &AnytimeConfig, seed: u64, start: Instant, stop: &AtomicBool) -> Outcome {
    let mut w = Worker::new(p, seed, cfg.weights);
    let (lo, hi) = (w.lo, w.hi);
    let n0 = match p.n_knowledge() {
        super::problem::NKnowledge::Interval(iv) => (iv.n_star.round().max(0.0) as usize).clamp(lo, hi),
        super::problem::NKnowledge::Exact(_) => lo,
    };
    let deadline = start + cfg.time_budget;
    let batch = cfg.moves_per_batch.unwrap_or(hi.max(50)).max(1);
    let certify = !p.is_informed();
    let mut out = Outcome {
        rows: Vec::new(),
        labels: Vec::new(),
        key: (false, f64::NEG_INFINITY),
        trace: Vec::new(),
        first_feasible: None,
        restarts_completed: 0,
        moves: 0,
        proven: false,
        timed_out: false,
    };
    let mut last_trace = f64::NEG_INFINITY;

    let mut record = |w: &Worker<'_>, out: &mut Outcome| {
        let key = w.key();
        if !better(key, out.key) {
            return;
        }
        out.key = key;
        out.rows.clone_from(&w.rows);
        out.labels.clone_from(&w.labels);
        let now = start.elapsed().as_secs_f64();
        if key.0 && out.first_feasible.is_none() {
            out.first_feasible = Some(now);
        }
        let point = TracePoint {
            time_s: now,
            objective: key.1,
            hard_feasible: key.0,
        };
        // thin the trace to one point per millisecond
        if now - last_trace >= 1e-3 || out.trace.last().is_none_or(|l| l.hard_feasible != key.0) {
            out.trace.push(point);
            last_trace = now;
        } else if let Some(l) = out.trace.last_mut() {
            *l = point;
        }
    };

    'outer: for r in 0..cfg.restarts.max(1) {
        if r == 0 {
            w.greedy_init(n0, 0.0);
        } else if r % 2 == 1 {
            w.load(&out.rows.clone(), &out.labels.clone());
        } else {
            w.greedy_init(n0, 2.0);
        }
        record(&w, &mut out);
        if certify && w.nonzero == 0 {
            out.proven = true;
            stop.store(true, Ordering::Relaxed);
            break;
        }
        let reheat = if r % 2 == 1 { 0.3 } else { 1.0 };
        let t0 = calibrate(&mut w) * reheat;
        let t_end = t0 * cfg.final_temperature_ratio;
        let mut temp = t0;
        while temp > t_end {
            for _ in 0..batch {
                out.moves += 1;
                if out.moves % 256 == 0 {
                    if Instant::now() >= deadline {
                        out.timed_out = true;
                        break 'outer;
                    }
                    if stop.load(Ordering::Relaxed) {
                        break 'outer;
                    }
                }
                let Some(prop) = w.propose() else {
                    continue;
                };
                w.stage(&prop);
                let d = w.proposal_delta(&prop);
                if d >= 0.0 || w.rng.random::<f64>() < (d / temp).exp() {
                    w.commit(prop);
                    if d > 0.0 || w.out_of_domain == 0 {
                        record(&w, &mut out);
                    }
                    if certify && w.nonzero == 0 {
                        out.proven = true;
                        stop.store(true, Ordering::Relaxed);
                        break 'outer;
                    }
                }
            }
            temp *= cfg.cooling;
        }
        // drop accumulated rounding before the next restart
        w.rescore();
        out.restarts_completed += 1;
    }
    out
}

/// Sets attributes that do not affect any tree's routing to 0 (groups to
/// their lowest such member), unless that would worsen the objective.
fn canonicalize(p: &ReconstructionProblem, rows: &mut [u64]) {
    let nt = p.num_trees();
    let mut cur = vec![0u32; nt];
    let mut alt = vec![0u32; nt];
    for (k, x) in rows.iter_mut().enumerate() {
        let fixed = p.row_fixed(k).0;
        p.route_all(*x, &mut cur);
        let neutral = |y: u64, alt: &mut [u32], x: u64| {
            p.route_all(y, alt);
            alt == &cur[..] && (!p.is_informed() || p.distance_to_known(y) <= p.distance_to_known(x))
        };
        let mut bits = *x & p.free_mask & !fixed;
        while bits != 0 {
            let a = bits.trailing_zeros();
            bits &= bits - 1;
            let y = *x & !(1u64 << a);
            if neutral(y, &mut alt, *x) {
                *x = y;
            }
        }
        for &g in &p.group_masks {
            if *x & g & fixed != 0 {
                continue;
            }
            let current = *x & g;
            let mut open = g & !fixed & (current - 1);
            while open != 0 {
                let b = open.trailing_zeros();
                open &= open - 1;
                let y = (*x & !g) | (1u64 << b);
                if neutral(y, &mut alt, *x) {
                    *x = y;
                    break;
                }
            }
        }
    }
}

/// Runs the annealing portfolio until every worker finishes its restarts,
/// the time budget runs out, or a worker reaches the likelihood upper bound.
/// With one thread the result is a deterministic function of the seed unless
/// the time budget cuts the search short.
pub fn solve_anytime(problem: &ReconstructionProblem, config: &AnytimeConfig, seed: u64) -> Result<AnytimeResult> {
    let start = Instant::now();
    let stop = AtomicBool::new(false);
    let threads = config.threads.max(1);
    let outcomes: Vec<Outcome> = if threads == 1 {
        vec![run_worker(problem, config, crate::rng::derive_seed(seed, &[0]), start, &stop)]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads as u64)
                .map(|i| {
                    let stop = &stop;
                    s.spawn(move || run_worker(problem, config, crate::rng::derive_seed(seed, &[i]), start, stop))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("solver worker panicked")).collect()
        })
    };

    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if better(o.key, outcomes[best].key) {
            best = i;
        }
    }
    let mut points: Vec<TracePoint> = outcomes.iter().flat_map(|o| o.trace.iter().copied()).collect();
    points.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
    let mut trace: Vec<TracePoint> = Vec::new();
    for pt in points {
        if trace.last().is_none_or(|l| better((pt.hard_feasible, pt.objective), (l.hard_feasible, l.objective))) {
            trace.push(pt);
        }
    }

    let o = &outcomes[best];
    let mut rows = o.rows.clone();
    let mut labels = o.labels.clone();
    canonicalize(problem, &mut rows);
    if !problem.has_row_constraints() {
        let m = problem.num_features();
        let mut pairs: Vec<(Vec<u8>, usize, u64)> = rows
            .iter()
            .zip(&labels)
            .map(|(&x, &c)| (super::problem::bits_to_row(x, m), c, x))
            .collect();
        pairs.sort();
        rows = pairs.iter().map(|p| p.2).collect();
        labels = pairs.iter().map(|p| p.1).collect();
    }
    Ok(AnytimeResult {
        solution: CandidateSolution::from_free_rows(problem, &rows, &labels),
        trace,
        time_to_first_feasible: outcomes.iter().filter_map(|o| o.first_feasible).reduce(f64::min),
        restarts_completed: outcomes.iter().map(|o| o.restarts_completed).sum(),
        moves: outcomes.iter().map(|o| o.moves).sum(),
        proven_optimal: outcomes.iter().any(|o| o.proven),
        timed_out: outcomes.iter().any(|o| o.timed_out),
    })
}
