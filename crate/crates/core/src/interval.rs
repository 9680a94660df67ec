//! Sorted unions of disjoint closed intervals.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

/// Sorted, pairwise disjoint closed intervals, consecutive ones separated by
/// more than the merge tolerance they were built with.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    pub fn empty() -> Self {
        Self { intervals: Vec::new() }
    }

    /// Sorts and merges intervals whose separation is at most `merge_tol`.
    pub fn from_intervals(mut parts: Vec<(f64, f64)>, merge_tol: f64) -> Result<Self> {
        for &(lo, hi) in &parts {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Contract(format!("invalid interval [{lo}, {hi}]")));
            }
        }
        parts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut intervals: Vec<(f64, f64)> = Vec::with_capacity(parts.len());
        for (lo, hi) in parts {
            match intervals.last_mut() {
                Some(last) if lo - last.1 <= merge_tol => last.1 = last.1.max(hi),
                _ => intervals.push((lo, hi)),
            }
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn is_connected(&self) -> bool {
        self.intervals.len() <= 1
    }

    pub fn hull(&self) -> Option<(f64, f64)> {
        Some((self.intervals.first()?.0, self.intervals.last()?.1))
    }

    /// Open intervals strictly between consecutive members.
    pub fn gaps(&self) -> Vec<(f64, f64)> {
        self.intervals.windows(2).map(|w| (w[0].1, w[1].0)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= x && x <= hi)
    }

    /// Whether the open interval `(a, b)` meets the union.
    pub fn meets_open(&self, a: f64, b: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo < b && hi > a)
    }

    /// Distance from the closed interval `[a, b]` to the union (0 if they meet).
    pub fn distance_to(&self, a: f64, b: f64) -> f64 {
        self.intervals
            .iter()
            .map(|&(lo, hi)| {
                if hi < a {
                    a - hi
                } else if lo > b {
                    lo - b
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether every member lies inside some member of `other`.
    pub fn is_subset_of(&self, other: &IntervalUnion, tol: f64) -> bool {
        self.intervals
            .iter()
            .all(|&(lo, hi)| other.intervals.iter().any(|&(a, b)| a - tol <= lo && hi <= b + tol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn merging_and_gaps() {
        let u = IntervalUnion::from_intervals(vec![(1.5, 2.5), (-0.2, 0.3), (3.7, 4.2)], 1e-9).unwrap();
        assert_eq!(u.intervals(), &[(-0.2, 0.3), (1.5, 2.5), (3.7, 4.2)]);
        assert_eq!(u.gaps(), vec![(0.3, 1.5), (2.5, 3.7)]);
        assert_eq!(u.hull(), Some((-0.2, 4.2)));

        let single = IntervalUnion::from_intervals(vec![(0.0, 3.0), (1.0, 2.0)], 1e-9).unwrap();
        assert!(single.is_connected() && single.gaps().is_empty());

        let touching = IntervalUnion::from_intervals(vec![(1.0, 2.0), (0.0, 1.0)], 1e-9).unwrap();
        assert_eq!(touching.intervals(), &[(0.0, 2.0)]);
        assert!(touching.gaps().is_empty());
    }

    #[test]
    fn queries() {
        let u = IntervalUnion::from_intervals(vec![(0.0, 1.0), (2.0, 3.0)], 0.0).unwrap();
        assert!(u.contains(2.5) && !u.contains(1.5));
        assert!(!u.meets_open(1.0, 2.0));
        assert!(u.meets_open(0.9, 1.2));
        assert!((u.distance_to(1.2, 1.5) - 0.2).abs() < 1e-15);
        let inner = IntervalUnion::from_intervals(vec![(0.1, 0.9)], 0.0).unwrap();
        assert!(inner.is_subset_of(&u, 0.0));
        assert!(!u.is_subset_of(&inner, 0.0));
    }

    #[test]
    fn rejects_reversed() {
        assert!(IntervalUnion::from_intervals(vec![(1.0, 0.0)], 0.0).is_err());
    }
}
