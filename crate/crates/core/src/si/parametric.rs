//! Invariance intervals from a comparison trace and the parametric line
//! search for the truncation set.

use super::interval::IntervalSet;
use super::line::LineParameterization;
use super::quadratic::{solve_quadratic_leq, QuadraticInequality, DEFAULT_DEGENERACY_TOL};
use crate::afe::{AfeSearcher, ComparisonTrace, Relation, SearchConfig};
use crate::stats::Dataset;
use crate::error::{Error, Result};
use crate::stats::basis::dot;
use crate::stats::CovarianceModel;

/// Relative slack allowed when a recorded relation is re-evaluated at its
/// own line parameter.
pub const TRACE_TOL: f64 = 1e-7;

/// Half width of the scanned window, in units of `sqrt(ηᵀΣη)`.
pub const WINDOW_SDS: f64 = 10.0;

/// Step taken past an interval end before the next search run.
pub fn step_gap(sigma_eta_sq: f64) -> f64 {
    (1e-6 * sigma_eta_sq.sqrt()).max(1e-9)
}

/// AIC polynomials of each trace node along the line, computed lazily.
struct NodePolynomials<'a> {
    trace: &'a ComparisonTrace,
    aw: Vec<f64>,
    bw: Vec<f64>,
    cache: Vec<Option<QuadraticInequality>>,
}

impl<'a> NodePolynomials<'a> {
    fn new(trace: &'a ComparisonTrace, line: &LineParameterization, sigma: &CovarianceModel) -> Self {
        let mut aw: Vec<f64> = line.a.iter().cloned().collect();
        let mut bw: Vec<f64> = line.b.iter().cloned().collect();
        sigma.whiten_in_place(&mut aw);
        sigma.whiten_in_place(&mut bw);
        Self {
            trace,
            aw,
            bw,
            cache: vec![None; trace.nodes.len()],
        }
    }

    fn get(&mut self, id: usize) -> QuadraticInequality {
        if let Some(q) = self.cache[id] {
            return q;
        }
        let node = &self.trace.nodes[id];
        let basis = node.whitened_basis();
        let ra = basis.residual(&self.aw);
        let rb = basis.residual(&self.bw);
        let q = QuadraticInequality::new(
            dot(&rb, &rb),
            2.0 * dot(&ra, &rb),
            dot(&ra, &ra) + 2.0 * node.num_features as f64,
        );
        self.cache[id] = Some(q);
        q
    }
}

fn component_near(set: &IntervalSet, z: f64) -> (f64, f64) {
    if let Some(c) = set.component(z) {
        return c;
    }
    let nearest = set.intervals().iter().copied().min_by(|a, b| {
        let da = (a.0 - z).abs().min((a.1 - z).abs());
        let db = (b.0 - z).abs().min((b.1 - z).abs());
        da.total_cmp(&db)
    });
    match nearest {
        Some((lo, hi)) => (lo.min(z), hi.max(z)),
        None => (z, z),
    }
}

/// `[L_z, U_z]`: the connected set of line parameters around `z` on which
/// every comparison in `trace` keeps its recorded relation.
pub fn interval_for_z(
    trace: &ComparisonTrace,
    line: &LineParameterization,
    z: f64,
    sigma: &CovarianceModel,
) -> Result<(f64, f64)> {
    let mut polys = NodePolynomials::new(trace, line, sigma);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (k, entry) in trace.entries.iter().enumerate() {
        let left = polys.get(entry.left);
        let right = polys.get(entry.right);
        let diff = QuadraticInequality::new(left.c2 - right.c2, left.c1 - right.c1, left.c0 - right.c0);
        let q = match entry.relation {
            Relation::Le | Relation::Lt => diff,
            Relation::Ge => diff.negate(),
        };
        let scale = left.eval(z).abs().max(right.eval(z).abs()).max(1.0);
        let value = q.eval(z);
        if value > TRACE_TOL * scale {
            return Err(Error::TraceMismatch {
                entry: k,
                z,
                excess: value,
            });
        }
        let (l, h) = component_near(&solve_quadratic_leq(&q, DEFAULT_DEGENERACY_TOL), z);
        lo = lo.max(l);
        hi = hi.min(h);
    }
    Ok((lo.min(z), hi.max(z)))
}

#[derive(Debug, Clone)]
pub struct ParametricOutcome {
    pub z_set: IntervalSet,
    /// `[L_z, U_z]` at the observed statistic.
    pub observed_interval: (f64, f64),
    pub n_afe_calls: usize,
}

/// Sweeps the line over `z_obs ± 10·sqrt(ηᵀΣη)`, collecting every invariance
/// interval whose search output has the same canonical key set as `target`.
pub fn parametric_search_with(
    searcher: &AfeSearcher,
    line: &LineParameterization,
    target: &[String],
) -> Result<ParametricOutcome> {
    let mut target: Vec<String> = target.to_vec();
    target.sort();
    let width = WINDOW_SDS * line.sigma_eta();
    let (w_lo, w_hi) = (line.z_obs - width, line.z_obs + width);
    let delta = step_gap(line.sigma_eta_sq);
    let sigma = searcher.covariance();
    let mut pieces = Vec::new();
    let mut calls = 0usize;

    let mut probe = |z: f64, force: bool| -> Result<(f64, f64)> {
        let result = searcher.run(&line.at(z))?;
        calls += 1;
        let (lo, hi) = interval_for_z(&result.trace, line, z, sigma)?;
        if force || (!result.generated.is_empty() && result.key_set() == target) {
            pieces.push((lo.max(w_lo), hi.min(w_hi)));
        }
        Ok((lo, hi))
    };

    // z_obs belongs to Z by definition; it is kept even if rounding flips a tie.
    let observed_interval = probe(line.z_obs, true)?;
    let mut z = observed_interval.1.max(line.z_obs) + delta;
    while z <= w_hi {
        let (_, hi) = probe(z, false)?;
        z = hi.max(z) + delta;
    }
    let mut z = observed_interval.0.min(line.z_obs) - delta;
    while z >= w_lo {
        let (lo, _) = probe(z, false)?;
        z = lo.min(z) - delta;
    }
    Ok(ParametricOutcome {
        z_set: IntervalSet::from_intervals_with_gap(pieces, delta),
        observed_interval,
        n_afe_calls: calls,
    })
}

pub fn parametric_search(
    dataset: &Dataset,
    sigma: &CovarianceModel,
    config: &SearchConfig,
    line: &LineParameterization,
    target: &[String],
) -> Result<IntervalSet> {
    let searcher = AfeSearcher::new(dataset.x(), sigma, config)?;
    Ok(parametric_search_with(&searcher, line, target)?.z_set)
}
