//! Directed tree search over feature sets.
//!
//! Each depth expands randomly drawn parents with one new transformed feature,
//! then sorts the new level by AIC and keeps at most `max_parents` nodes whose
//! non-improvement counter stays below `tolerance`. Every comparison whose
//! outcome depends on the response is written to a [`ComparisonTrace`].

use std::collections::HashSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::expr::{Expr, Transform};
use super::rng::SearchRng;
use crate::error::{Error, Result};
use crate::stats::basis::OrthoBasis;
use crate::stats::linear::ensure_full_rank;
use crate::stats::{CovarianceModel, Dataset};

/// Relative residual under which a whitened column counts as dependent.
const WHITENED_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Maximum depth `D`.
    pub max_depth: usize,
    /// Nodes generated per depth `N`.
    pub max_nodes: usize,
    /// Parents kept per depth `M`.
    pub max_parents: usize,
    /// Non-improvement tolerance `γ`.
    pub tolerance: u32,
    pub seed: u64,
    pub transforms: Vec<Transform>,
    pub collinearity_tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_depth: 6,
            max_nodes: 3,
            max_parents: 3,
            tolerance: 2,
            seed: 0,
            transforms: Transform::ALL.to_vec(),
            collinearity_tol: 1e-6,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.max_depth == 0 || self.max_nodes == 0 || self.max_parents == 0 {
            return fail("depth, node and parent limits must be positive");
        }
        if self.max_parents > self.max_nodes {
            return fail("max_parents must not exceed max_nodes");
        }
        if self.tolerance == 0 {
            return fail("tolerance must be at least 1");
        }
        if self.transforms.is_empty() {
            return fail("at least one transformation is required");
        }
        let distinct: HashSet<_> = self.transforms.iter().collect();
        if distinct.len() != self.transforms.len() {
            return fail("duplicate transformations");
        }
        if !(self.collinearity_tol >= 0.0 && self.collinearity_tol < 1.0) {
            return fail("collinearity_tol must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug)]
struct NodeState {
    generated_cols: Vec<Arc<Vec<f64>>>,
    euclid: OrthoBasis,
    /// Basis of the whitened columns; shared with `euclid` for isotropic Σ.
    aic_basis: Arc<OrthoBasis>,
}

/// A feature set in the search tree: the original columns plus `generated`.
#[derive(Debug, Clone)]
pub struct Node {
    /// Global creation index; the root is 0.
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub generated: Vec<Expr>,
    pub no_improve: u32,
    pub parent_no_improve: u32,
    /// AIC under the response of the run that produced the node.
    pub aic: f64,
    state: Arc<NodeState>,
}

impl Node {
    pub fn num_features(&self, m: usize) -> usize {
        m + self.generated.len()
    }

    /// Order-independent identity of the feature set.
    pub fn set_key(&self) -> String {
        feature_set_key(&self.generated)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.generated.iter().any(|e| e.key() == key)
    }
}

pub fn feature_set_key(generated: &[Expr]) -> String {
    let mut keys: Vec<&str> = generated.iter().map(|e| e.key()).collect();
    keys.sort_unstable();
    keys.join(";")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// `AIC(left) ≤ AIC(right)`
    #[serde(rename = "<=")]
    Le,
    /// `AIC(left) < AIC(right)`
    #[serde(rename = "<")]
    Lt,
    /// `AIC(left) ≥ AIC(right)`
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    pub fn holds(self, left: f64, right: f64) -> bool {
        match self {
            Relation::Le => left <= right,
            Relation::Lt => left < right,
            Relation::Ge => left >= right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    SortAdjacent,
    ImprovementCheck,
}

/// One recorded comparison; `left`/`right` index [`ComparisonTrace::nodes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub left: usize,
    pub right: usize,
    pub relation: Relation,
    pub origin: Origin,
}

/// Feature set referenced by a trace entry, with the basis needed to evaluate
/// its AIC along any response line.
#[derive(Debug, Clone)]
pub struct TraceNode {
    pub id: usize,
    pub generated: Vec<Expr>,
    pub num_features: usize,
    aic_basis: Arc<OrthoBasis>,
}

impl TraceNode {
    /// Orthonormal basis of the whitened columns `L⁻¹V`.
    pub fn whitened_basis(&self) -> &OrthoBasis {
        &self.aic_basis
    }
}

#[derive(Debug, Clone, Default)]
pub struct ComparisonTrace {
    /// Indexed by node id.
    pub nodes: Vec<TraceNode>,
    pub entries: Vec<TraceEntry>,
}

impl ComparisonTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, origin: Origin) -> usize {
        self.entries.iter().filter(|e| e.origin == origin).count()
    }
}

/// Per-depth record of the search, for diagnostics and alignment checks.
#[derive(Debug, Clone, Default)]
pub struct Level {
    pub depth: usize,
    pub candidates: Vec<usize>,
    pub kept: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct AfeResult {
    /// Generated features of the selected node, in insertion order.
    pub generated: Vec<Expr>,
    pub trace: ComparisonTrace,
    pub final_depth: usize,
    pub best_node: Node,
    pub levels: Vec<Level>,
}

impl AfeResult {
    pub fn require_generated(&self) -> Result<&[Expr]> {
        if self.generated.is_empty() {
            Err(Error::EmptyGeneration)
        } else {
            Ok(&self.generated)
        }
    }

    /// Sorted canonical keys of the generated features.
    pub fn key_set(&self) -> Vec<String> {
        let mut keys: Vec<String> = self.generated.iter().map(|e| e.key().to_string()).collect();
        keys.sort();
        keys
    }

    /// Canonical keys of every generated candidate, depth by depth.
    pub fn candidate_keys(&self) -> Vec<Vec<String>> {
        self.levels
            .iter()
            .map(|l| {
                l.candidates
                    .iter()
                    .map(|&id| feature_set_key(&self.trace.nodes[id].generated))
                    .collect()
            })
            .collect()
    }
}

/// Candidate view used by node reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReduceInput {
    pub id: usize,
    pub aic: f64,
    pub parent_no_improve: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReduceOutcome {
    /// Id of the AIC-best candidate (cached as the level's best).
    pub best: Option<usize>,
    /// Kept `(id, no_improve)` pairs in AIC order.
    pub kept: Vec<(usize, u32)>,
    /// Every visited `(id, no_improve)` pair in AIC order.
    pub visited: Vec<(usize, u32)>,
}

/// Sorts candidates by AIC (ties by id), caches the level's best, updates the
/// non-improvement counters against the previous level's best `(id, aic)` and
/// keeps nodes until `max_parents` are collected. Comparisons are appended to
/// `entries`.
pub fn reduce_nodes(
    candidates: &[ReduceInput],
    previous_best: (usize, f64),
    max_parents: usize,
    tolerance: u32,
    entries: &mut Vec<TraceEntry>,
) -> ReduceOutcome {
    let mut order: Vec<&ReduceInput> = candidates.iter().collect();
    order.sort_by(|a, b| a.aic.total_cmp(&b.aic).then(a.id.cmp(&b.id)));
    for w in order.windows(2) {
        entries.push(TraceEntry {
            left: w[0].id,
            right: w[1].id,
            relation: Relation::Le,
            origin: Origin::SortAdjacent,
        });
    }
    let (best_id, best_aic) = previous_best;
    let mut kept = Vec::new();
    let mut visited = Vec::new();
    for c in order.iter() {
        let improved = c.aic < best_aic;
        entries.push(TraceEntry {
            left: c.id,
            right: best_id,
            relation: if improved { Relation::Lt } else { Relation::Ge },
            origin: Origin::ImprovementCheck,
        });
        let counter = if improved { 0 } else { c.parent_no_improve + 1 };
        visited.push((c.id, counter));
        if counter < tolerance {
            kept.push((c.id, counter));
        }
        if kept.len() == max_parents {
            break;
        }
    }
    ReduceOutcome {
        best: order.first().map(|c| c.id),
        kept,
        visited,
    }
}

/// `true` when `candidate` is finite, nonzero and its relative residual
/// against the span of `node_columns` exceeds `tol`.
pub fn multicollinearity_check(
    candidate: &DVector<f64>,
    node_columns: &DMatrix<f64>,
    tol: f64,
) -> bool {
    let mut basis = OrthoBasis::empty(node_columns.nrows());
    for col in node_columns.column_iter() {
        let v: Vec<f64> = col.iter().cloned().collect();
        basis.try_push(&v, 0.0);
    }
    admissible(&basis, candidate.as_slice(), tol).is_some()
}

fn admissible(basis: &OrthoBasis, candidate: &[f64], tol: f64) -> Option<(Vec<f64>, f64)> {
    if candidate.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let norm = candidate.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return None;
    }
    let r = basis.residual(candidate);
    let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    (rn > tol * norm).then_some((r, rn))
}

/// The search prepared for one design and covariance; reusable across
/// responses.
#[derive(Debug, Clone)]
pub struct AfeSearcher {
    x: DMatrix<f64>,
    x_cols: Vec<Arc<Vec<f64>>>,
    cov: CovarianceModel,
    config: SearchConfig,
    root: Node,
}

impl AfeSearcher {
    pub fn new(x: &DMatrix<f64>, cov: &CovarianceModel, config: &SearchConfig) -> Result<Self> {
        config.validate()?;
        let n = x.nrows();
        if cov.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "design has {n} rows, covariance dimension is {}",
                cov.dim()
            )));
        }
        ensure_full_rank(x)?;
        let x_cols: Vec<Arc<Vec<f64>>> = x
            .column_iter()
            .map(|c| Arc::new(c.iter().cloned().collect()))
            .collect();
        let mut euclid = OrthoBasis::empty(n);
        for c in &x_cols {
            euclid.try_push(c, 0.0);
        }
        let aic_basis = if cov.is_isotropic() {
            Arc::new(euclid.clone())
        } else {
            let mut w = OrthoBasis::empty(n);
            for c in &x_cols {
                let mut v = c.to_vec();
                cov.whiten_in_place(&mut v);
                if !w.try_push(&v, WHITENED_RANK_TOL) {
                    return Err(Error::SingularDesign {
                        rank: w.rank(),
                        cols: x.ncols(),
                    });
                }
            }
            Arc::new(w)
        };
        if euclid.rank() != x.ncols() {
            return Err(Error::SingularDesign {
                rank: euclid.rank(),
                cols: x.ncols(),
            });
        }
        let root = Node {
            id: 0,
            parent: None,
            depth: 0,
            generated: Vec::new(),
            no_improve: 0,
            parent_no_improve: 0,
            aic: f64::NAN,
            state: Arc::new(NodeState {
                generated_cols: Vec::new(),
                euclid,
                aic_basis,
            }),
        };
        Ok(Self {
            x: x.clone(),
            x_cols,
            cov: cov.clone(),
            config: config.clone(),
            root,
        })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    pub fn covariance(&self) -> &CovarianceModel {
        &self.cov
    }

    pub fn n(&self) -> usize {
        self.cov.dim()
    }

    pub fn m(&self) -> usize {
        self.x_cols.len()
    }

    /// The depth-0 node holding only the original columns.
    pub fn root(&self) -> &Node {
        &self.root
    }

    fn feature<'a>(&'a self, node: &'a Node, f: usize) -> (Expr, &'a [f64]) {
        let m = self.m();
        if f < m {
            (Expr::leaf(f), &self.x_cols[f])
        } else {
            (node.generated[f - m].clone(), &node.state.generated_cols[f - m])
        }
    }

    fn combinations(&self, p: usize) -> usize {
        self.config
            .transforms
            .iter()
            .map(|t| match t.arity() {
                1 => p,
                _ => p * p.saturating_sub(1) / 2,
            })
            .sum()
    }

    /// Draws candidates from `parents` until `max_nodes` are accepted or every
    /// `(parent, transform, operands)` combination has been tried. Reads no
    /// response values.
    pub fn generate_candidates(
        &self,
        parents: &[Node],
        rng: &mut SearchRng,
        next_id: &mut usize,
    ) -> Vec<Node> {
        assert!(!parents.is_empty(), "generation needs at least one parent");
        let m = self.m();
        let total: usize = parents
            .iter()
            .map(|p| self.combinations(p.num_features(m)))
            .sum();
        let mut tried: Vec<HashSet<String>> = vec![HashSet::new(); parents.len()];
        let mut tried_count = 0usize;
        let mut level_sets: HashSet<String> = HashSet::new();
        let mut accepted = Vec::new();
        let transforms = &self.config.transforms;

        while accepted.len() < self.config.max_nodes && tried_count < total {
            let pi = rng.index(parents.len());
            let transform = transforms[rng.index(transforms.len())];
            let parent = &parents[pi];
            let p = parent.num_features(m);
            let (expr, column) = match transform.unary() {
                Some(op) => {
                    let (e, col) = self.feature(parent, rng.index(p));
                    let values: Vec<f64> = col.iter().map(|&v| op.apply(v)).collect();
                    (Expr::unary(op, e), values)
                }
                None => {
                    if p < 2 {
                        continue;
                    }
                    let a = rng.index(p);
                    let b = loop {
                        let b = rng.index(p);
                        if b != a {
                            break b;
                        }
                    };
                    let (ea, ca) = self.feature(parent, a);
                    let (eb, cb) = self.feature(parent, b);
                    let values: Vec<f64> = ca.iter().zip(cb).map(|(u, v)| u * v).collect();
                    (Expr::mul(ea, eb), values)
                }
            };
            if !tried[pi].insert(expr.key().to_string()) {
                continue;
            }
            tried_count += 1;
            if parent.contains_key(expr.key()) {
                continue;
            }
            if let Some(child) = self.extend(parent, expr, column) {
                if level_sets.insert(child.set_key()) {
                    let mut child = child;
                    child.id = *next_id;
                    *next_id += 1;
                    accepted.push(child);
                }
            }
        }
        accepted
    }

    fn extend(&self, parent: &Node, expr: Expr, column: Vec<f64>) -> Option<Node> {
        let state = &parent.state;
        let (residual, norm) = admissible(&state.euclid, &column, self.config.collinearity_tol)?;
        let mut euclid = state.euclid.clone();
        euclid.push_residual(&residual, norm);
        let aic_basis = if self.cov.is_isotropic() {
            Arc::new(euclid.clone())
        } else {
            let mut w = column.clone();
            self.cov.whiten_in_place(&mut w);
            let mut basis = (*state.aic_basis).clone();
            if !basis.try_push(&w, WHITENED_RANK_TOL) {
                return None;
            }
            Arc::new(basis)
        };
        let mut generated_cols = state.generated_cols.clone();
        generated_cols.push(Arc::new(column));
        let mut generated = parent.generated.clone();
        generated.push(expr);
        Some(Node {
            id: usize::MAX,
            parent: Some(parent.id),
            depth: parent.depth + 1,
            generated,
            no_improve: 0,
            parent_no_improve: parent.no_improve,
            aic: f64::NAN,
            state: Arc::new(NodeState {
                generated_cols,
                euclid,
                aic_basis,
            }),
        })
    }

    fn node_aic(&self, node: &Node, whitened_y: &[f64]) -> f64 {
        node.state.aic_basis.residual_norm_sq(whitened_y) + 2.0 * node.num_features(self.m()) as f64
    }

    fn trace_node(&self, node: &Node) -> TraceNode {
        TraceNode {
            id: node.id,
            generated: node.generated.clone(),
            num_features: node.num_features(self.m()),
            aic_basis: node.state.aic_basis.clone(),
        }
    }

    /// Runs the search on response `y`.
    pub fn run(&self, y: &DVector<f64>) -> Result<AfeResult> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "response has {} entries, expected {}",
                y.len(),
                self.n()
            )));
        }
        let mut whitened_y: Vec<f64> = y.iter().cloned().collect();
        self.cov.whiten_in_place(&mut whitened_y);

        let mut rng = SearchRng::new(self.config.seed);
        let mut trace = ComparisonTrace::default();
        let mut root = self.root.clone();
        root.aic = self.node_aic(&root, &whitened_y);
        trace.nodes.push(self.trace_node(&root));

        let mut next_id = 1;
        let mut current = vec![root.clone()];
        let mut previous_best = root;
        let mut final_depth = 0;
        let mut levels = Vec::new();

        for d in 0..self.config.max_depth {
            let mut candidates = self.generate_candidates(&current, &mut rng, &mut next_id);
            for c in candidates.iter_mut() {
                c.aic = self.node_aic(c, &whitened_y);
                debug_assert_eq!(c.id, trace.nodes.len());
                trace.nodes.push(self.trace_node(c));
            }
            let inputs: Vec<ReduceInput> = candidates
                .iter()
                .map(|c| ReduceInput {
                    id: c.id,
                    aic: c.aic,
                    parent_no_improve: c.parent_no_improve,
                })
                .collect();
            let outcome = reduce_nodes(
                &inputs,
                (previous_best.id, previous_best.aic),
                self.config.max_parents,
                self.config.tolerance,
                &mut trace.entries,
            );
            let first_id = candidates.first().map_or(0, |c| c.id);
            let by_id = |id: usize| candidates[id - first_id].clone();
            levels.push(Level {
                depth: d + 1,
                candidates: candidates.iter().map(|c| c.id).collect(),
                kept: outcome.kept.iter().map(|k| k.0).collect(),
            });
            if outcome.kept.is_empty() {
                break;
            }
            current = outcome
                .kept
                .iter()
                .map(|&(id, counter)| {
                    let mut node = by_id(id);
                    node.no_improve = counter;
                    node
                })
                .collect();
            previous_best = by_id(outcome.best.expect("nonempty level has a best node"));
            final_depth = d + 1;
        }

        let best_node = current[0].clone();
        Ok(AfeResult {
            generated: best_node.generated.clone(),
            trace,
            final_depth,
            best_node,
            levels,
        })
    }
}

/// Runs the search on a dataset.
pub fn run_afe(dataset: &Dataset, sigma: &CovarianceModel, config: &SearchConfig) -> Result<AfeResult> {
    AfeSearcher::new(dataset.x(), sigma, config)?.run(dataset.y())
}
