//! Finite unions of disjoint closed intervals on the extended real line.

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

/// Sorted, pairwise disjoint intervals of positive length. Endpoints may be
/// infinite.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn real_line() -> Self {
        Self {
            intervals: vec![(f64::NEG_INFINITY, f64::INFINITY)],
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self::from_intervals(vec![(lo, hi)])
    }

    /// Normalises arbitrary intervals: drops empty and zero-length ones, sorts
    /// and merges overlapping or touching neighbours.
    pub fn from_intervals(intervals: Vec<(f64, f64)>) -> Self {
        Self::from_intervals_with_gap(intervals, 0.0)
    }

    /// As [`from_intervals`](Self::from_intervals), additionally merging
    /// neighbours separated by at most `gap`.
    pub fn from_intervals_with_gap(mut intervals: Vec<(f64, f64)>, gap: f64) -> Self {
        intervals.retain(|&(lo, hi)| hi > lo && !lo.is_nan() && !hi.is_nan());
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (lo, hi) in intervals {
            match out.last_mut() {
                Some(last) if lo - last.1 <= gap => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        Self { intervals: out }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.component(x).is_some()
    }

    /// The interval containing `x`, if any.
    pub fn component(&self, x: f64) -> Option<(f64, f64)> {
        self.intervals
            .iter()
            .copied()
            .find(|&(lo, hi)| lo <= x && x <= hi)
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        Self::from_intervals(all)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            let lo = a[i].0.max(b[j].0);
            let hi = a[i].1.min(b[j].1);
            if hi > lo {
                out.push((lo, hi));
            }
            if a[i].1 < b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { intervals: out }
    }

    pub fn clip(&self, lo: f64, hi: f64) -> Self {
        self.intersect(&Self::interval(lo, hi))
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }

    /// Maps every point `u` to `c·u` for `c > 0`.
    pub fn scale(&self, c: f64) -> Self {
        assert!(c > 0.0);
        Self {
            intervals: self.intervals.iter().map(|&(lo, hi)| (lo * c, hi * c)).collect(),
        }
    }

    /// `{u : |u| ≥ t}` for `t ≥ 0`.
    pub fn outside_symmetric(t: f64) -> Self {
        let t = t.abs();
        if t == 0.0 {
            return Self::real_line();
        }
        Self {
            intervals: vec![(f64::NEG_INFINITY, -t), (t, f64::INFINITY)],
        }
    }
}

fn endpoint<S: Serializer>(v: f64, s: S) -> Result<S::Ok, S::Error> {
    if v == f64::INFINITY {
        s.serialize_str("inf")
    } else if v == f64::NEG_INFINITY {
        s.serialize_str("-inf")
    } else {
        s.serialize_f64(v)
    }
}

struct Endpoint(f64);

impl Serialize for Endpoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        endpoint(self.0, s)
    }
}

/// Serialises as `[[lo, hi], ...]` with infinities as `"inf"` / `"-inf"`.
impl Serialize for IntervalSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.intervals.len()))?;
        for &(lo, hi) in &self.intervals {
            seq.serialize_element(&[Endpoint(lo), Endpoint(hi)])?;
        }
        seq.end()
    }
}
