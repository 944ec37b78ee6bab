use serde::{Deserialize, Serialize};

use super::interval::{estimate_n_interval, NInterval};
use crate::dataset::{BinaryDataset, FeatureLayout};
use crate::error::{Error, Result};
use crate::forest::{CellLayout, Forest, TreeNode};
use crate::noise::{DeltaVector, NoiseModel, TailMode};

/// Attribute indices an adversary knows, with their values for every row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnownColumns {
    pub columns: Vec<usize>,
    /// `values[k][j]` is the value of `columns[j]` in row `k`.
    pub values: Vec<Vec<u8>>,
}

impl KnownColumns {
    /// Projects `dataset` onto `columns`.
    pub fn from_dataset(dataset: &BinaryDataset, columns: Vec<usize>) -> Self {
        let values = dataset
            .rows()
            .iter()
            .map(|r| columns.iter().map(|&a| r[a]).collect())
            .collect();
        KnownColumns { columns, values }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ThreatModel {
    /// N known exactly.
    Full { n: usize },
    /// N estimated from the noisy counts.
    UnknownN,
    /// Some attribute columns known for every row; N is the row count.
    Partial { known: KnownColumns },
    /// All but one training row known, with labels. `alpha` defaults to 20ε.
    Informed {
        known_rows: BinaryDataset,
        #[serde(default)]
        alpha: Option<f64>,
    },
}

impl ThreatModel {
    pub fn name(&self) -> &'static str {
        match self {
            ThreatModel::Full { .. } => "full",
            ThreatModel::UnknownN => "unknown_n",
            ThreatModel::Partial { .. } => "partial",
            ThreatModel::Informed { .. } => "informed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NKnowledge {
    Exact(usize),
    Interval(NInterval),
}

pub(crate) const LEAF: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Node {
    pub attr: u32,
    pub left: u32,
    pub right: u32,
}

/// Tree over u64 rows (bit `a` holds attribute `a`). A leaf node stores its
/// leaf ordinal in `left`.
#[derive(Clone, Debug)]
pub(crate) struct CompiledTree {
    pub nodes: Vec<Node>,
    /// (mask of attributes forced to 1, mask forced to 0) per leaf.
    pub predicates: Vec<(u64, u64)>,
}

impl CompiledTree {
    #[inline]
    pub fn route(&self, x: u64) -> u32 {
        let mut i = 0usize;
        loop {
            let n = self.nodes[i];
            if n.attr == LEAF {
                return n.left;
            }
            i = if (x >> n.attr) & 1 == 1 { n.left } else { n.right } as usize;
        }
    }
}

pub fn row_to_bits(row: &[u8]) -> u64 {
    row.iter()
        .enumerate()
        .fold(0u64, |acc, (a, &b)| acc | (u64::from(b & 1) << a))
}

pub fn bits_to_row(x: u64, m: usize) -> Vec<u8> {
    (0..m).map(|a| ((x >> a) & 1) as u8).collect()
}

/// Scores of a candidate assignment of the free rows.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub derived_counts: Vec<i64>,
    pub deltas: DeltaVector,
    pub log_likelihood: f64,
    pub regularizer: Option<f64>,
    pub objective: f64,
    pub hard_feasible: bool,
}

/// Everything the attack knows: forest structure, noisy counts, noise model
/// and the threat-model side information.
#[derive(Clone, Debug)]
pub struct ReconstructionProblem {
    forest: Forest,
    threat: ThreatModel,
    pub(crate) trees: Vec<CompiledTree>,
    cells: CellLayout,
    noisy: Vec<i64>,
    noise: NoiseModel,
    n_knowledge: NKnowledge,
    /// Per free row: (mask of known attributes, their values). Empty unless
    /// some columns are known.
    row_fixed: Vec<(u64, u64)>,
    known_rows: Vec<(u64, usize)>,
    base_counts: Vec<i64>,
    known_ones: Vec<u32>,
    alpha: Option<f64>,
    pub(crate) group_masks: Vec<u64>,
    pub(crate) free_mask: u64,
}

fn compile(forest: &Forest) -> Vec<CompiledTree> {
    forest
        .trees()
        .iter()
        .map(|t| {
            let mut leaf_no = 0u32;
            let nodes: Vec<Node> = t
                .nodes()
                .iter()
                .map(|n| match n {
                    TreeNode::Internal { attribute, left, right } => Node {
                        attr: *attribute as u32,
                        left: *left as u32,
                        right: *right as u32,
                    },
                    TreeNode::Leaf { .. } => Node {
                        attr: LEAF,
                        left: 0,
                        right: 0,
                    },
                })
                .collect();
            // leaf ordinals follow the tree's own numbering
            let mut nodes = nodes;
            let mut stack = vec![0usize];
            while let Some(i) = stack.pop() {
                if nodes[i].attr == LEAF {
                    nodes[i].left = leaf_no;
                    leaf_no += 1;
                } else {
                    stack.push(nodes[i].right as usize);
                    stack.push(nodes[i].left as usize);
                }
            }
            let predicates = t
                .leaf_predicates()
                .iter()
                .map(|p| {
                    (
                        p.positive.iter().fold(0u64, |m, &a| m | 1 << a),
                        p.negative.iter().fold(0u64, |m, &a| m | 1 << a),
                    )
                })
                .collect();
            CompiledTree { nodes, predicates }
        })
        .collect()
}

fn validate_known_columns(layout: &FeatureLayout, known: &KnownColumns) -> Result<Vec<(u64, u64)>> {
    let m = layout.num_features();
    let mut mask = 0u64;
    for &a in &known.columns {
        if a >= m || mask >> a & 1 == 1 {
            return Err(Error::param(format!("known column {a} is out of range or repeated")));
        }
        mask |= 1 << a;
    }
    let mut out = Vec::with_capacity(known.values.len());
    for (k, vals) in known.values.iter().enumerate() {
        if vals.len() != known.columns.len() || vals.iter().any(|&b| b > 1) {
            return Err(Error::param(format!("known values of row {k} do not match the known columns")));
        }
        let value = known.columns.iter().zip(vals).fold(0u64, |v, (&a, &b)| v | (u64::from(b) << a));
        for g in layout.groups() {
            let gm = g.attribute_indices.iter().fold(0u64, |m, &a| m | 1 << a);
            let ones = (value & gm).count_ones();
            let all_known = mask & gm == gm;
            if ones > 1 || (all_known && ones != 1) {
                return Err(Error::param(format!("known values of row {k} violate a one-hot group")));
            }
        }
        out.push((mask, value));
    }
    Ok(out)
}

impl ReconstructionProblem {
    /// Builds the problem from an adversary's view of a forest. True counts,
    /// if present, are ignored.
    pub fn build(forest: &Forest, threat: ThreatModel) -> Result<Self> {
        let forest = forest.attacker_view();
        let m = forest.num_features();
        if m > 64 {
            return Err(Error::param(format!("the solver supports at most 64 attributes, got {m}")));
        }
        let layout = forest.layout().clone();
        let c = forest.num_classes();
        let trees = compile(&forest);
        let cells = forest.cell_layout();
        let noisy = forest.noisy_counts_flat();
        let noise = NoiseModel::new(forest.epsilon_per_leaf().finite_f64())?;
        let mut base_counts = vec![0i64; cells.len()];
        let mut row_fixed = Vec::new();
        let mut known_rows = Vec::new();
        let mut known_ones = vec![0u32; m];
        let mut alpha = None;

        let n_knowledge = match &threat {
            ThreatModel::Full { n } => {
                if *n == 0 {
                    return Err(Error::param("N must be at least 1"));
                }
                NKnowledge::Exact(*n)
            }
            ThreatModel::UnknownN => NKnowledge::Interval(estimate_n_interval(&forest)?),
            ThreatModel::Partial { known } => {
                if known.values.is_empty() {
                    return Err(Error::param("partial knowledge needs at least one row"));
                }
                row_fixed = validate_known_columns(&layout, known)?;
                NKnowledge::Exact(known.values.len())
            }
            ThreatModel::Informed { known_rows: rows, alpha: a } => {
                if rows.m() != m || rows.num_classes() != c || rows.layout() != &layout {
                    return Err(Error::param("known rows do not match the forest's attributes or classes"));
                }
                if rows.n() == 0 {
                    return Err(Error::param("the informed adversary needs at least one known row"));
                }
                for (row, &label) in rows.rows().iter().zip(rows.labels()) {
                    let x = row_to_bits(row);
                    for (t, tree) in trees.iter().enumerate() {
                        base_counts[cells.index(t, tree.route(x) as usize, label)] += 1;
                    }
                    for a in 0..m {
                        known_ones[a] += u32::from(row[a]);
                    }
                    known_rows.push((x, label));
                }
                alpha = Some(match a {
                    Some(a) if *a >= 0.0 && a.is_finite() => *a,
                    Some(a) => return Err(Error::param(format!("alpha must be finite and non-negative, got {a}"))),
                    None => match forest.epsilon_total().finite_f64() {
                        Some(e) => 20.0 * e,
                        None => return Err(Error::param("alpha must be given when the budget is infinite")),
                    },
                });
                NKnowledge::Exact(rows.n() + 1)
            }
        };

        let group_masks: Vec<u64> = layout
            .groups()
            .iter()
            .map(|g| g.attribute_indices.iter().fold(0u64, |acc, &a| acc | 1 << a))
            .collect();
        let all = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
        let free_mask = group_masks.iter().fold(all, |acc, g| acc & !g);
        Ok(ReconstructionProblem {
            forest,
            threat,
            trees,
            cells,
            noisy,
            noise,
            n_knowledge,
            row_fixed,
            known_rows,
            base_counts,
            known_ones,
            alpha,
            group_masks,
            free_mask,
        })
    }

    pub fn forest(&self) -> &Forest {
        &self.forest
    }

    pub fn threat(&self) -> &ThreatModel {
        &self.threat
    }

    pub fn layout(&self) -> &FeatureLayout {
        self.forest.layout()
    }

    pub fn num_features(&self) -> usize {
        self.forest.num_features()
    }

    pub fn num_classes(&self) -> usize {
        self.forest.num_classes()
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn cells(&self) -> &CellLayout {
        &self.cells
    }

    pub fn noisy_counts(&self) -> &[i64] {
        &self.noisy
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn n_knowledge(&self) -> &NKnowledge {
        &self.n_knowledge
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn is_informed(&self) -> bool {
        self.alpha.is_some()
    }

    pub fn num_known_rows(&self) -> usize {
        self.known_rows.len()
    }

    pub(crate) fn known_rows(&self) -> &[(u64, usize)] {
        &self.known_rows
    }

    pub(crate) fn base_counts(&self) -> &[i64] {
        &self.base_counts
    }

    /// Inclusive range of the number of rows the solver chooses.
    pub fn free_row_range(&self) -> (usize, usize) {
        match &self.n_knowledge {
            NKnowledge::Exact(n) => {
                let f = n - self.known_rows.len();
                (f, f)
            }
            NKnowledge::Interval(iv) => (iv.n_min, iv.n_max),
        }
    }

    /// (mask, values) of the attributes of free row `k` that are known.
    #[inline]
    pub(crate) fn row_fixed(&self, k: usize) -> (u64, u64) {
        self.row_fixed.get(k).copied().unwrap_or((0, 0))
    }

    pub(crate) fn has_row_constraints(&self) -> bool {
        !self.row_fixed.is_empty()
    }

    /// Weight on the log-likelihood term of the objective.
    pub fn ll_weight(&self) -> f64 {
        match self.alpha {
            Some(a) => a / self.cells.len() as f64,
            None => 1.0,
        }
    }

    /// Weight on the summed Manhattan distance to the known rows.
    pub fn reg_weight(&self) -> f64 {
        if self.alpha.is_some() {
            1.0 / self.known_rows.len() as f64
        } else {
            0.0
        }
    }

    /// Σ_k ||x − x_k||₁ over the known rows.
    #[inline]
    pub(crate) fn distance_to_known(&self, x: u64) -> f64 {
        let k = self.known_rows.len() as u32;
        let mut d = 0u32;
        for (a, &ones) in self.known_ones.iter().enumerate() {
            d += if (x >> a) & 1 == 1 { k - ones } else { ones };
        }
        f64::from(d)
    }

    /// Leaf reached in every tree, in tree order.
    pub(crate) fn route_all(&self, x: u64, out: &mut [u32]) {
        for (t, tree) in self.trees.iter().enumerate() {
            out[t] = tree.route(x);
        }
    }

    pub(crate) fn row_allowed(&self, k: usize, x: u64) -> bool {
        let (mask, val) = self.row_fixed(k);
        x & mask == val
            && self.group_masks.iter().all(|g| (x & g).count_ones() == 1)
            && (self.num_features() == 64 || x >> self.num_features() == 0)
    }

    /// Scores free rows `rows`/`labels` (known rows are added implicitly).
    pub fn evaluate(&self, rows: &[u64], labels: &[usize], mode: TailMode) -> Evaluation {
        let mut counts = self.base_counts.clone();
        for (&x, &c) in rows.iter().zip(labels) {
            for (t, tree) in self.trees.iter().enumerate() {
                counts[self.cells.index(t, tree.route(x) as usize, c)] += 1;
            }
        }
        let deltas: Vec<i64> = self.noisy.iter().zip(&counts).map(|(n, d)| n - d).collect();
        let hard_feasible = deltas.iter().all(|&d| self.noise.in_domain(d));
        let deltas = DeltaVector(deltas);
        let log_likelihood = self.noise.log_likelihood(&deltas, mode);
        let regularizer = self
            .alpha
            .map(|_| rows.iter().map(|&x| self.distance_to_known(x)).sum::<f64>());
        let objective = match regularizer {
            Some(r) => {
                let w = self.ll_weight();
                let ll = if w == 0.0 { 0.0 } else { w * log_likelihood };
                ll - self.reg_weight() * r
            }
            None => log_likelihood,
        };
        Evaluation {
            derived_counts: counts,
            deltas,
            log_likelihood,
            regularizer,
            objective,
            hard_feasible,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let record = ProblemRecord {
            forest: serde_json::from_str(&self.forest.to_json()?)?,
            threat: self.threat.clone(),
        };
        Ok(serde_json::to_string(&record)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let record: ProblemRecord = serde_json::from_str(s)?;
        let forest = Forest::from_json(&record.forest.to_string())?;
        Self::build(&forest, record.threat)
    }
}

#[derive(Serialize, Deserialize)]
struct ProblemRecord {
    forest: serde_json::Value,
    threat: ThreatModel,
}

/// Builds the problem for a threat model. Alias of [`ReconstructionProblem::build`].
pub fn build_problem(forest_view: &Forest, threat: ThreatModel) -> Result<ReconstructionProblem> {
    ReconstructionProblem::build(forest_view, threat)
}
