//! Closed-form steady-state results for the continuous-priority preemptive
//! M/M/1 queue with unit service rate and arrival rate `rho`.
//!
//! Everything hinges on the effective load seen from priority `p`,
//! `(1 - p) * rho`: customers above `p` never see anyone below them, so the
//! population above `p` is an ordinary M/M/1 queue with that load. Whenever
//! the load is `>= 1` the corresponding quantity is `f64::INFINITY`.

use std::fmt;
use std::sync::Arc;

use crate::error::AnalyticError;
use crate::measure_state::{Interval, PriorityLevel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticParams {
    rho: f64,
}

impl AnalyticParams {
    pub fn new(rho: f64) -> Result<Self, AnalyticError> {
        if rho > 0.0 && rho.is_finite() {
            Ok(AnalyticParams { rho })
        } else {
            Err(AnalyticError::InvalidRate(rho))
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `(1 - p) * rho`, the arrival rate of customers strictly above `p`.
    #[inline]
    pub fn load_above(&self, p: PriorityLevel) -> f64 {
        (1.0 - p.value()) * self.rho
    }

    /// Whether the population above `p` has a proper steady state.
    #[inline]
    pub fn is_stable_at(&self, p: PriorityLevel) -> bool {
        self.load_above(p) < 1.0
    }

    /// Critical priority `1 - 1/rho` for an overloaded queue, `None` when the
    /// queue is stable. Priorities at or below it have divergent metrics.
    pub fn critical_priority(&self) -> Option<f64> {
        (self.rho >= 1.0).then(|| 1.0 - 1.0 / self.rho)
    }

    /// Equilibrium law of `Xbar(p)`, the number of customers above `p`.
    pub fn ccdf_equilibrium_law(&self, p: PriorityLevel) -> GeometricLaw {
        let q = self.load_above(p);
        if q < 1.0 {
            GeometricLaw::Geometric { q }
        } else {
            GeometricLaw::Divergent
        }
    }

    /// `E[Xbar(p)] = q / (1 - q)` with `q = (1 - p) rho`.
    pub fn mean_ccdf(&self, p: PriorityLevel) -> f64 {
        self.ccdf_equilibrium_law(p).mean()
    }

    /// Density `m(p) = rho / (1 - (1 - p) rho)^2` of the mean measure.
    pub fn mean_density(&self, p: PriorityLevel) -> f64 {
        let q = self.load_above(p);
        if q < 1.0 {
            let slack = 1.0 - q;
            self.rho / (slack * slack)
        } else {
            f64::INFINITY
        }
    }

    /// Mean measure `mu(B) = E[x(B)]` of an interval, via the antiderivative
    /// `-E[Xbar(.)]` of the density. Endpoint openness does not matter since
    /// the measure has no atoms.
    pub fn mean_measure(&self, b: &Interval) -> f64 {
        let (lo, hi) = (b.lo().value, b.hi().value);
        if lo == hi {
            return 0.0;
        }
        let lo = PriorityLevel::new(lo).expect("interval endpoints lie in [0, 1]");
        let hi = PriorityLevel::new(hi).expect("interval endpoints lie in [0, 1]");
        if !self.is_stable_at(lo) {
            // The density is not integrable at or below the critical priority.
            return f64::INFINITY;
        }
        self.mean_ccdf(lo) - self.mean_ccdf(hi)
    }

    /// Expected sojourn time `s(p) = 1 / (1 - (1 - p) rho)^2`.
    pub fn sojourn(&self, p: PriorityLevel) -> f64 {
        let q = self.load_above(p);
        if q < 1.0 {
            let slack = 1.0 - q;
            1.0 / (slack * slack)
        } else {
            f64::INFINITY
        }
    }

    /// Expected waiting time `w(p) = s(p) - 1`.
    pub fn waiting(&self, p: PriorityLevel) -> f64 {
        self.sojourn(p) - 1.0
    }

    /// Average sojourn time over customers with priority in `(p, 1]`,
    /// `(1/(1-p)) * int_p^1 s(q) dq = 1 / (1 - (1 - p) rho)`.
    pub fn mean_sojourn_above(&self, p: PriorityLevel) -> Result<f64, AnalyticError> {
        if p == PriorityLevel::MAX {
            return Err(AnalyticError::EmptyConditioningSet);
        }
        let q = self.load_above(p);
        Ok(if q < 1.0 { 1.0 / (1.0 - q) } else { f64::INFINITY })
    }
}

/// Law of `Xbar(p)`: geometric on `{0, 1, ...}` with `pmf(k) = (1-q) q^k`,
/// or almost surely infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeometricLaw {
    Geometric { q: f64 },
    Divergent,
}

impl GeometricLaw {
    pub fn is_divergent(&self) -> bool {
        matches!(self, GeometricLaw::Divergent)
    }

    /// Probability of exactly `k` customers; zero everywhere when divergent.
    pub fn pmf(&self, k: u64) -> f64 {
        match *self {
            GeometricLaw::Geometric { q } => (1.0 - q) * powi(q, k),
            GeometricLaw::Divergent => 0.0,
        }
    }

    /// `P(X <= k) = 1 - q^(k+1)`.
    pub fn cdf(&self, k: u64) -> f64 {
        match *self {
            GeometricLaw::Geometric { q } => 1.0 - powi(q, k + 1),
            GeometricLaw::Divergent => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            GeometricLaw::Geometric { q } => q / (1.0 - q),
            GeometricLaw::Divergent => f64::INFINITY,
        }
    }
}

fn powi(q: f64, k: u64) -> f64 {
    match i32::try_from(k) {
        Ok(k) => q.powi(k),
        Err(_) => q.powf(k as f64),
    }
}

/// A monotone nondecreasing quantile function `F^{-1}: [0, 1] -> R`, used to
/// relabel uniform priorities with another distribution.
#[derive(Clone)]
pub struct QuantileMap {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl QuantileMap {
    /// Wraps a caller-supplied quantile function. Monotonicity is the
    /// caller's responsibility; see [`QuantileMap::is_monotone_on`].
    pub fn from_fn(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        QuantileMap {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn identity() -> Self {
        Self::from_fn("identity", |p| p)
    }

    /// Exponential(rate) quantile `-ln(1 - p) / rate`; `+inf` at `p = 1`.
    pub fn exponential(rate: f64) -> Self {
        Self::from_fn(format!("exponential({rate})"), move |p| -(-p).ln_1p() / rate)
    }

    /// `p^k` for `k > 0`.
    pub fn power(k: f64) -> Self {
        Self::from_fn(format!("power({k})"), move |p| p.powf(k))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn apply(&self, p: PriorityLevel) -> f64 {
        (self.f)(p.value())
    }

    /// Spot-checks monotonicity on an evenly spaced grid of `n + 1` points.
    pub fn is_monotone_on(&self, n: usize) -> bool {
        let values: Vec<f64> = (0..=n)
            .map(|i| (self.f)(i as f64 / n as f64))
            .collect();
        values.windows(2).all(|w| w[0] <= w[1])
    }
}

impl fmt::Debug for QuantileMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuantileMap").field("name", &self.name).finish()
    }
}

impl Default for QuantileMap {
    fn default() -> Self {
        Self::identity()
    }
}

/// Applies `F^{-1}` to a uniform priority level.
pub fn transform_priority(map: &QuantileMap, p: PriorityLevel) -> f64 {
    map.apply(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(rho: f64) -> AnalyticParams {
        AnalyticParams::new(rho).unwrap()
    }

    fn pl(v: f64) -> PriorityLevel {
        PriorityLevel::new(v).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(AnalyticParams::new(0.0).is_err());
        assert!(AnalyticParams::new(-1.0).is_err());
        assert!(AnalyticParams::new(f64::NAN).is_err());
        assert!(AnalyticParams::new(f64::INFINITY).is_err());
        assert!(AnalyticParams::new(50.0).is_ok());
    }

    #[test]
    fn critical_priority_values() {
        assert!(close(params(1.25).critical_priority().unwrap(), 0.2, 1e-15));
        assert_eq!(params(1.0).critical_priority(), Some(0.0));
        assert_eq!(params(0.75).critical_priority(), None);
    }

    #[test]
    fn geometric_law_at_zero() {
        let law = params(0.75).ccdf_equilibrium_law(PriorityLevel::MIN);
        assert!(close(law.pmf(0), 0.25, 1e-15));
        assert!(close(law.pmf(1), 0.1875, 1e-15));
        assert!(close(law.mean(), 3.0, 1e-15));
    }

    #[test]
    fn geometric_law_at_top_is_point_mass() {
        let law = params(0.75).ccdf_equilibrium_law(PriorityLevel::MAX);
        assert_eq!(law.pmf(0), 1.0);
        assert_eq!(law.pmf(3), 0.0);
        assert_eq!(law.mean(), 0.0);
    }

    #[test]
    fn geometric_law_divergent_when_overloaded() {
        let law = params(1.25).ccdf_equilibrium_law(pl(0.1));
        assert!(law.is_divergent());
        assert_eq!(law.mean(), f64::INFINITY);
    }

    #[test]
    fn geometric_partial_sums() {
        let law = params(0.75).ccdf_equilibrium_law(pl(0.3));
        let q = 0.7 * 0.75;
        let sum: f64 = (0..=100).map(|k| law.pmf(k)).sum();
        assert!(close(sum, 1.0 - q_pow(q, 101), 1e-12));
        assert!(close(law.cdf(100), sum, 1e-12));
        assert!(1.0 - sum < 1e-25);
    }

    fn q_pow(q: f64, n: i32) -> f64 {
        q.powi(n)
    }

    #[test]
    fn mean_ccdf_values() {
        let a = params(0.75);
        assert!(close(a.mean_ccdf(PriorityLevel::MIN), 3.0, 1e-15));
        assert!(close(a.mean_ccdf(pl(0.5)), 0.6, 1e-15));
        assert_eq!(params(1.7).mean_ccdf(PriorityLevel::MAX), 0.0);
    }

    #[test]
    fn mean_density_values() {
        let a = params(0.75);
        assert!(close(a.mean_density(pl(0.5)), 1.92, 1e-14));
        assert!(close(a.mean_density(PriorityLevel::MAX), 0.75, 1e-15));
        assert_eq!(params(1.25).mean_density(pl(0.2)), f64::INFINITY);
    }

    #[test]
    fn mean_measure_values() {
        let a = params(0.75);
        assert!(close(a.mean_measure(&Interval::unit()), 3.0, 1e-15));
        assert!(close(a.mean_measure(&Interval::closed(0.5, 1.0).unwrap()), 0.6, 1e-15));
        let b = params(1.25);
        assert_eq!(b.mean_measure(&Interval::closed(0.0, 0.1).unwrap()), f64::INFINITY);
        assert_eq!(b.mean_measure(&Interval::closed(0.1, 0.1).unwrap()), 0.0);
        assert!(b.mean_measure(&Interval::closed(0.3, 1.0).unwrap()).is_finite());
    }

    #[test]
    fn mean_measure_matches_midpoint_rule() {
        let a = params(0.75);
        let n = 200_000;
        let h = 0.5 / n as f64;
        let quad: f64 = (0..n)
            .map(|i| a.mean_density(pl(0.5 + (i as f64 + 0.5) * h)) * h)
            .sum();
        assert!(close(quad, 0.6, 1e-8));
    }

    #[test]
    fn sojourn_and_waiting_values() {
        let a = params(0.75);
        assert!(close(a.sojourn(PriorityLevel::MIN), 16.0, 1e-14));
        assert!(close(a.waiting(PriorityLevel::MIN), 15.0, 1e-14));
        for rho in [0.3, 1.0, 4.0] {
            assert_eq!(params(rho).sojourn(PriorityLevel::MAX), 1.0);
            assert_eq!(params(rho).waiting(PriorityLevel::MAX), 0.0);
        }
        assert_eq!(params(1.25).sojourn(pl(0.15)), f64::INFINITY);
        assert_eq!(params(2.0).waiting(pl(0.5)), f64::INFINITY);
    }

    #[test]
    fn mean_sojourn_above_values() {
        let a = params(0.75);
        assert!(close(a.mean_sojourn_above(PriorityLevel::MIN).unwrap(), 4.0, 1e-15));
        assert!(close(a.mean_sojourn_above(pl(0.5)).unwrap(), 1.6, 1e-15));
        assert_eq!(
            params(1.25).mean_sojourn_above(pl(0.2)).unwrap(),
            f64::INFINITY
        );
        assert_eq!(
            a.mean_sojourn_above(PriorityLevel::MAX),
            Err(AnalyticError::EmptyConditioningSet)
        );
    }

    #[test]
    fn boundary_load_of_exactly_one_diverges() {
        // (1 - 0.5) * 2 == 1 exactly.
        let a = params(2.0);
        let p = pl(0.5);
        assert_eq!(a.load_above(p), 1.0);
        assert_eq!(a.mean_ccdf(p), f64::INFINITY);
        assert_eq!(a.mean_density(p), f64::INFINITY);
        assert_eq!(a.sojourn(p), f64::INFINITY);
    }

    #[test]
    fn quantile_maps() {
        assert_eq!(transform_priority(&QuantileMap::identity(), pl(0.42)), 0.42);
        let exp = QuantileMap::exponential(1.0);
        assert!(close(transform_priority(&exp, pl(0.5)), std::f64::consts::LN_2, 1e-15));
        assert_eq!(transform_priority(&exp, PriorityLevel::MAX), f64::INFINITY);
        assert!(exp.is_monotone_on(1000));
        assert!(QuantileMap::power(3.0).is_monotone_on(1000));
        assert!(!QuantileMap::from_fn("neg", |p| -p).is_monotone_on(10));
    }

    proptest! {
        #[test]
        fn metrics_decrease_in_priority(rho in 0.05..5.0f64, a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
            let (lo, hi) = if a <= b { (pl(a), pl(b)) } else { (pl(b), pl(a)) };
            let params = params(rho);
            prop_assert!(params.mean_density(lo) >= params.mean_density(hi));
            prop_assert!(params.sojourn(lo) >= params.sojourn(hi));
            prop_assert!(params.waiting(lo) >= params.waiting(hi));
            prop_assert!(params.mean_ccdf(lo) >= params.mean_ccdf(hi));
        }

        #[test]
        fn little_law_closure(rho in 0.05..5.0f64, p in 0.0..1.0f64) {
            let params = params(rho);
            let p = pl(p);
            let lhs = params.mean_ccdf(p);
            let rhs = (1.0 - p.value()) * rho * params.mean_sojourn_above(p).unwrap();
            if lhs.is_finite() {
                prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
            } else {
                prop_assert_eq!(rhs, f64::INFINITY);
            }
        }

        #[test]
        fn infinite_exactly_at_or_below_critical(rho in 0.05..5.0f64, p in 0.0..=1.0f64) {
            let params = params(rho);
            let p = pl(p);
            let divergent = (1.0 - p.value()) * rho >= 1.0;
            prop_assert_eq!(params.mean_density(p).is_infinite(), divergent);
            prop_assert_eq!(params.sojourn(p).is_infinite(), divergent);
            prop_assert_eq!(params.waiting(p).is_infinite(), divergent);
            prop_assert_eq!(params.ccdf_equilibrium_law(p).is_divergent(), divergent);
        }
    }
}
