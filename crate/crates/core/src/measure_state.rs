//! Point-measure representation of the queue state.
//!
//! The state at time `t` is the multiset of priority levels of the customers
//! present, `x_t = sum_i delta_{p_i}`. The same object answers the CDF view
//! `X_t(p) = x_t([0, p])` and the CCDF view `Xbar_t(p) = x_t((p, 1])`, and
//! supports the ordered operations the preemptive scheduler needs.

use std::cmp::{Ordering, Reverse};
use std::collections::BTreeSet;
use std::fmt;
use std::ops::Bound;

use crate::error::StateError;

/// A priority level in `[0, 1]`. Higher values are served first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorityLevel(f64);

impl PriorityLevel {
    pub const MIN: PriorityLevel = PriorityLevel(0.0);
    pub const MAX: PriorityLevel = PriorityLevel(1.0);

    pub fn new(value: f64) -> Result<Self, StateError> {
        if (0.0..=1.0).contains(&value) {
            // `+ 0.0` folds -0.0 into 0.0 so the total order has no split zero.
            Ok(PriorityLevel(value + 0.0))
        } else {
            Err(StateError::PriorityOutOfRange(value))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

// NaN is rejected by the constructor, so the total order agrees with `<`.
impl Eq for PriorityLevel {}

impl PartialOrd for PriorityLevel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PriorityLevel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for PriorityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl TryFrom<f64> for PriorityLevel {
    type Error = StateError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        PriorityLevel::new(value)
    }
}

/// One endpoint of an [`Interval`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint {
    pub value: f64,
    pub closed: bool,
}

/// An interval of `[0, 1]` with explicit endpoint openness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: Endpoint,
    hi: Endpoint,
}

impl Interval {
    pub fn new(lo: f64, lo_closed: bool, hi: f64, hi_closed: bool) -> Result<Self, StateError> {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
            return Err(StateError::IntervalOutOfRange { lo, hi });
        }
        if lo > hi {
            return Err(StateError::MalformedInterval { lo, hi });
        }
        let (lo, hi) = (lo + 0.0, hi + 0.0);
        Ok(Interval {
            lo: Endpoint {
                value: lo,
                closed: lo_closed,
            },
            hi: Endpoint {
                value: hi,
                closed: hi_closed,
            },
        })
    }

    /// `[a, b]`
    pub fn closed(a: f64, b: f64) -> Result<Self, StateError> {
        Self::new(a, true, b, true)
    }

    /// `(a, b)`
    pub fn open(a: f64, b: f64) -> Result<Self, StateError> {
        Self::new(a, false, b, false)
    }

    /// `[a, b)`
    pub fn closed_open(a: f64, b: f64) -> Result<Self, StateError> {
        Self::new(a, true, b, false)
    }

    /// `(a, b]`
    pub fn open_closed(a: f64, b: f64) -> Result<Self, StateError> {
        Self::new(a, false, b, true)
    }

    /// The whole priority range `[0, 1]`.
    pub fn unit() -> Self {
        Self::closed(0.0, 1.0).expect("unit interval is well formed")
    }

    pub fn lo(&self) -> Endpoint {
        self.lo
    }

    pub fn hi(&self) -> Endpoint {
        self.hi
    }

    /// Lebesgue length `hi - lo`.
    pub fn length(&self) -> f64 {
        self.hi.value - self.lo.value
    }

    pub fn is_empty(&self) -> bool {
        self.lo.value == self.hi.value && !(self.lo.closed && self.hi.closed)
    }

    pub fn contains(&self, p: f64) -> bool {
        let above_lo = if self.lo.closed {
            p >= self.lo.value
        } else {
            p > self.lo.value
        };
        let below_hi = if self.hi.closed {
            p <= self.hi.value
        } else {
            p < self.hi.value
        };
        above_lo && below_hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo.closed { '[' } else { '(' },
            self.lo.value,
            self.hi.value,
            if self.hi.closed { ']' } else { ')' }
        )
    }
}

/// Atom key: ordered by priority, then by *reverse* arrival sequence so that
/// the largest key is the highest priority with the earliest arrival.
type AtomKey = (PriorityLevel, Reverse<u64>);

/// The queue state `x_t`: a finite multiset of priority atoms, each tagged
/// with the arrival sequence number of its customer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PointMeasure {
    atoms: BTreeSet<AtomKey>,
}

impl PointMeasure {
    pub fn new() -> Self {
        Self::default()
    }

    /// Total mass `x_t([0, 1])`.
    pub fn total(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Adds an atom at `p`. Sequence numbers are expected to be unique per
    /// customer; reinserting an existing `(p, seq)` pair is a no-op.
    pub fn insert(&mut self, p: PriorityLevel, seq: u64) {
        self.atoms.insert((p, Reverse(seq)));
    }

    /// Removes the atom with the highest priority; ties go to the smallest
    /// sequence number.
    pub fn remove_max(&mut self) -> Result<(PriorityLevel, u64), StateError> {
        self.atoms
            .pop_last()
            .map(|(p, Reverse(seq))| (p, seq))
            .ok_or(StateError::EmptyMeasure)
    }

    pub fn peek_max(&self) -> Option<(PriorityLevel, u64)> {
        self.atoms.last().map(|&(p, Reverse(seq))| (p, seq))
    }

    /// Removes a specific atom, returning whether it was present.
    pub fn remove(&mut self, p: PriorityLevel, seq: u64) -> bool {
        self.atoms.remove(&(p, Reverse(seq)))
    }

    /// `X_t(p) = x_t([0, p])`.
    pub fn cdf_count(&self, p: PriorityLevel) -> usize {
        self.atoms
            .range(..=(p, Reverse(0)))
            .count()
    }

    /// `Xbar_t(p) = x_t((p, 1])`.
    pub fn ccdf_count(&self, p: PriorityLevel) -> usize {
        self.atoms
            .range((Bound::Excluded((p, Reverse(0))), Bound::Unbounded))
            .count()
    }

    /// `x_t(B)` for an interval `B`.
    pub fn interval_count(&self, b: &Interval) -> usize {
        if b.is_empty() {
            return 0;
        }
        // Within one priority value, keys run from Reverse(u64::MAX) (smallest)
        // up to Reverse(0) (largest).
        let lo_p = PriorityLevel(b.lo.value);
        let hi_p = PriorityLevel(b.hi.value);
        let lower = if b.lo.closed {
            Bound::Included((lo_p, Reverse(u64::MAX)))
        } else {
            Bound::Excluded((lo_p, Reverse(0)))
        };
        let upper = if b.hi.closed {
            Bound::Included((hi_p, Reverse(0)))
        } else {
            Bound::Excluded((hi_p, Reverse(u64::MAX)))
        };
        self.atoms.range((lower, upper)).count()
    }

    /// Iterates atoms in ascending priority order.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (PriorityLevel, u64)> + '_ {
        self.atoms.iter().map(|&(p, Reverse(seq))| (p, seq))
    }

    /// The atom priorities in ascending order.
    pub fn sorted_priorities(&self) -> Vec<f64> {
        self.atoms.iter().map(|(p, _)| p.value()).collect()
    }
}

impl FromIterator<(PriorityLevel, u64)> for PointMeasure {
    fn from_iter<I: IntoIterator<Item = (PriorityLevel, u64)>>(iter: I) -> Self {
        let mut m = PointMeasure::new();
        for (p, seq) in iter {
            m.insert(p, seq);
        }
        m
    }
}
