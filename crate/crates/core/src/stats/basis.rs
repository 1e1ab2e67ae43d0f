//! Incrementally grown orthonormal bases for column spans.

/// Orthonormal basis stored column-major, grown one column at a time with
/// classical Gram-Schmidt applied twice.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    n: usize,
    cols: Vec<f64>,
}

impl OrthoBasis {
    pub fn empty(n: usize) -> Self {
        Self { n, cols: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        if self.n == 0 {
            0
        } else {
            self.cols.len() / self.n
        }
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.cols[k * self.n..(k + 1) * self.n]
    }

    /// Component of `v` orthogonal to the span.
    pub fn residual(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n);
        let mut r = v.to_vec();
        for _ in 0..2 {
            for k in 0..self.rank() {
                let q = self.column(k);
                let c = dot(q, &r);
                r.iter_mut().zip(q).for_each(|(ri, qi)| *ri -= c * qi);
            }
        }
        r
    }

    /// `‖v - P v‖²`.
    pub fn residual_norm_sq(&self, v: &[f64]) -> f64 {
        let r = self.residual(v);
        dot(&r, &r)
    }

    /// Appends `v` when its relative residual exceeds `rel_tol`; returns
    /// whether it was appended.
    pub fn try_push(&mut self, v: &[f64], rel_tol: f64) -> bool {
        let norm = dot(v, v).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return false;
        }
        let r = self.residual(v);
        let rn = dot(&r, &r).sqrt();
        if !(rn > rel_tol * norm) {
            return false;
        }
        self.push_residual(&r, rn);
        true
    }

    /// Appends an already orthogonalised residual of norm `norm`.
    pub fn push_residual(&mut self, r: &[f64], norm: f64) {
        self.cols.extend(r.iter().map(|x| x / norm));
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
