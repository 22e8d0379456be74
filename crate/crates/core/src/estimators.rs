//! Nonparametric binned estimates of the mean-measure density, the expected
//! sojourn time and the expected waiting time as functions of priority.
//!
//! All three use the same 20-bin grid: bin `i` is `[0.05 i, 0.05 (i + 1))`
//! with midpoint `0.025 + 0.05 i`, and estimates between midpoints are
//! linearly interpolated.
//!
//! * density: average the bin counts of the PASTA snapshots (state seen just
//!   before each arrival) and scale by `1 / 0.05`;
//! * sojourn / waiting: average per-customer times over customers whose
//!   priority falls in the bin.
//!
//! This module also hosts the time-path statistics used to check the
//! equilibrium law of `Xbar_t(p)` and the growth of the starved band.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analytic::{AnalyticParams, GeometricLaw};
use crate::error::EstimateError;
use crate::measure_state::{Interval, PriorityLevel};
use crate::simulator::{EventKind, SimTrace};

pub const BIN_COUNT: usize = 20;
pub const BIN_WIDTH: f64 = 0.05;

/// The fixed grid of 20 half-open bins tiling `[0, 1)`. A priority of
/// exactly 1.0 is folded into the last bin.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BinGrid;

impl BinGrid {
    pub fn len(&self) -> usize {
        BIN_COUNT
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `0.025 + 0.05 i`
    pub fn midpoint(&self, i: usize) -> f64 {
        (2 * i + 1) as f64 / 40.0
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> {
        (0..BIN_COUNT).map(|i| (2 * i + 1) as f64 / 40.0)
    }

    /// Lower edge of bin `i` (`i = 20` gives the right end 1.0).
    pub fn edge(&self, i: usize) -> f64 {
        i as f64 / BIN_COUNT as f64
    }

    pub fn interval(&self, i: usize) -> Interval {
        Interval::closed_open(self.edge(i), self.edge(i + 1)).expect("bin edges are ordered")
    }

    /// Index of the bin containing `p`, or `None` outside `[0, 1]`.
    pub fn bin_of(&self, p: f64) -> Option<usize> {
        if !(0.0..=1.0).contains(&p) {
            return None;
        }
        let mut i = ((p * BIN_COUNT as f64).floor() as usize).min(BIN_COUNT - 1);
        // Correct for rounding in the product so the edges agree with
        // `edge(i)` exactly.
        if i + 1 < BIN_COUNT && self.edge(i + 1) <= p {
            i += 1;
        } else if self.edge(i) > p {
            i -= 1;
        }
        Some(i)
    }
}

/// How customers still present at the horizon enter sojourn and waiting
/// averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfinityMode {
    /// A censored customer counts as an infinite time, so its bin is `inf`.
    Include,
    /// Censored customers are dropped and tallied in `censored_counts`.
    #[default]
    Exclude,
}

impl fmt::Display for InfinityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InfinityMode::Include => "include",
            InfinityMode::Exclude => "exclude",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    /// Mean-measure density `m`.
    #[serde(rename = "m")]
    Density,
    /// Expected sojourn time `s`.
    #[serde(rename = "s")]
    Sojourn,
    /// Expected waiting time `w`.
    #[serde(rename = "w")]
    Waiting,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Density, Metric::Sojourn, Metric::Waiting];

    pub fn symbol(&self) -> &'static str {
        match self {
            Metric::Density => "m",
            Metric::Sojourn => "s",
            Metric::Waiting => "w",
        }
    }

    pub fn theory(&self, params: &AnalyticParams, p: PriorityLevel) -> f64 {
        match self {
            Metric::Density => params.mean_density(p),
            Metric::Sojourn => params.sojourn(p),
            Metric::Waiting => params.waiting(p),
        }
    }

    pub fn estimate(&self, trace: &SimTrace, mode: InfinityMode) -> Result<BinnedEstimate, EstimateError> {
        match self {
            Metric::Density => estimate_density(trace),
            Metric::Sojourn => Ok(estimate_sojourn(trace, mode)),
            Metric::Waiting => Ok(estimate_waiting(trace, mode)),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "m" => Ok(Metric::Density),
            "s" => Ok(Metric::Sojourn),
            "w" => Ok(Metric::Waiting),
            other => Err(format!("unknown metric {other:?} (expected m, s or w)")),
        }
    }
}

/// Per-bin estimate. `values[i]` is `None` for a bin with no observations and
/// may be `+inf` in [`InfinityMode::Include`].
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedEstimate {
    pub grid: BinGrid,
    pub values: Vec<Option<f64>>,
    pub sample_counts: Vec<usize>,
    pub censored_counts: Vec<usize>,
}

impl BinnedEstimate {
    /// Builds an estimate from explicit per-bin values (no censoring).
    pub fn from_values(values: Vec<Option<f64>>, sample_counts: Vec<usize>) -> Self {
        assert_eq!(values.len(), BIN_COUNT);
        assert_eq!(sample_counts.len(), BIN_COUNT);
        BinnedEstimate {
            grid: BinGrid,
            values,
            sample_counts,
            censored_counts: vec![0; BIN_COUNT],
        }
    }

    /// Linear interpolation between the nearest populated midpoints; constant
    /// beyond the outermost ones. An infinite neighbour gives `inf`.
    pub fn evaluate(&self, p: f64) -> Result<f64, EstimateError> {
        let known: Vec<(f64, f64)> = self
            .values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (self.grid.midpoint(i), v)))
            .collect();
        let (first, last) = match (known.first(), known.last()) {
            (Some(&f), Some(&l)) => (f, l),
            _ => return Err(EstimateError::AllBinsEmpty),
        };
        if p <= first.0 {
            return Ok(first.1);
        }
        if p >= last.0 {
            return Ok(last.1);
        }
        let right = known.partition_point(|&(x, _)| x < p);
        let (x1, y1) = known[right];
        if x1 == p {
            return Ok(y1);
        }
        let (x0, y0) = known[right - 1];
        if y0.is_infinite() || y1.is_infinite() {
            return Ok(f64::INFINITY);
        }
        Ok(y0 + (y1 - y0) * (p - x0) / (x1 - x0))
    }
}

/// Density estimate from PASTA snapshots.
pub fn estimate_density(trace: &SimTrace) -> Result<BinnedEstimate, EstimateError> {
    if trace.snapshots.is_empty() {
        return Err(EstimateError::NoSnapshots);
    }
    let grid = BinGrid;
    let mut totals = [0u64; BIN_COUNT];
    for snap in &trace.snapshots {
        for &p in &snap.priorities {
            if let Some(i) = grid.bin_of(p) {
                totals[i] += 1;
            }
        }
    }
    let n = trace.snapshots.len();
    Ok(BinnedEstimate {
        grid,
        values: totals
            .iter()
            .map(|&c| Some(c as f64 / n as f64 / BIN_WIDTH))
            .collect(),
        sample_counts: vec![n; BIN_COUNT],
        censored_counts: vec![0; BIN_COUNT],
    })
}

/// Sojourn-time estimate: departure minus arrival.
pub fn estimate_sojourn(trace: &SimTrace, mode: InfinityMode) -> BinnedEstimate {
    per_customer_estimate(trace, mode, |c| c.sojourn())
}

/// Waiting-time estimate: start of the last service entry minus arrival,
/// over customers that departed.
pub fn estimate_waiting(trace: &SimTrace, mode: InfinityMode) -> BinnedEstimate {
    per_customer_estimate(trace, mode, |c| c.waiting())
}

fn per_customer_estimate(
    trace: &SimTrace,
    mode: InfinityMode,
    time_of: impl Fn(&crate::simulator::CustomerRecord) -> Option<f64>,
) -> BinnedEstimate {
    let grid = BinGrid;
    let mut sums = [0.0f64; BIN_COUNT];
    let mut counts = vec![0usize; BIN_COUNT];
    let mut censored = vec![0usize; BIN_COUNT];
    for c in &trace.customers {
        let Some(i) = grid.bin_of(c.priority) else { continue };
        match time_of(c) {
            Some(t) => {
                sums[i] += t;
                counts[i] += 1;
            }
            None => censored[i] += 1,
        }
    }
    let values = (0..BIN_COUNT)
        .map(|i| {
            if mode == InfinityMode::Include && censored[i] > 0 {
                Some(f64::INFINITY)
            } else if counts[i] > 0 {
                Some(sums[i] / counts[i] as f64)
            } else {
                None
            }
        })
        .collect();
    BinnedEstimate {
        grid,
        values,
        sample_counts: counts,
        censored_counts: censored,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinComparison {
    pub p: f64,
    pub estimate: Option<f64>,
    pub theory: f64,
    /// `|est - theory| / theory` when the bin takes part in the aggregate.
    pub relative_error: Option<f64>,
    /// Exactly one of estimate and theory is infinite.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub bins: Vec<BinComparison>,
    pub max_relative_error: f64,
    pub mean_relative_error: f64,
    pub compared_bins: usize,
}

impl ComparisonReport {
    pub fn flagged_bins(&self) -> impl Iterator<Item = &BinComparison> {
        self.bins.iter().filter(|b| b.flagged)
    }
}

/// Default distance from the critical priority below which bins are left
/// out of relative-error aggregates: one bin width.
pub const DEFAULT_STABLE_MARGIN: f64 = BIN_WIDTH;

/// Bin-by-bin relative error of `est` against `theory`, aggregated over bins
/// with finite theory and midpoint above `critical + stable_margin`.
pub fn compare(
    est: &BinnedEstimate,
    theory: impl Fn(f64) -> f64,
    critical: Option<f64>,
    stable_margin: f64,
) -> ComparisonReport {
    let mut bins = Vec::with_capacity(BIN_COUNT);
    let mut errors = Vec::new();
    for (i, &estimate) in est.values.iter().enumerate() {
        let p = est.grid.midpoint(i);
        let th = theory(p);
        let flagged = estimate.is_some_and(|e| e.is_infinite() != th.is_infinite());
        let eligible = th.is_finite() && critical.is_none_or(|c| p > c + stable_margin);
        let relative_error = match estimate {
            Some(e) if eligible && e.is_finite() => {
                let err = if th == 0.0 { (e - th).abs() } else { (e - th).abs() / th.abs() };
                errors.push(err);
                Some(err)
            }
            _ => None,
        };
        bins.push(BinComparison {
            p,
            estimate,
            theory: th,
            relative_error,
            flagged,
        });
    }
    let compared_bins = errors.len();
    ComparisonReport {
        bins,
        max_relative_error: errors.iter().copied().fold(0.0, f64::max),
        mean_relative_error: if compared_bins == 0 {
            0.0
        } else {
            errors.iter().sum::<f64>() / compared_bins as f64
        },
        compared_bins,
    }
}

/// Bin-wise summary of one metric across replications.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatedEstimate {
    pub grid: BinGrid,
    /// Mean of the finite per-replication values, or `inf` when a majority
    /// of populated replications are infinite.
    pub mean: Vec<Option<f64>>,
    /// Standard error of that mean (needs two finite replications).
    pub stderr: Vec<Option<f64>>,
    pub sample_counts: Vec<usize>,
    pub censored_counts: Vec<usize>,
    /// Per bin: replications whose value was infinite.
    pub infinite_replications: Vec<usize>,
    pub replications: usize,
}

impl ReplicatedEstimate {
    pub fn aggregate(estimates: &[BinnedEstimate]) -> Result<Self, EstimateError> {
        if estimates.is_empty() {
            return Err(EstimateError::NothingToAggregate);
        }
        let mut out = ReplicatedEstimate {
            grid: BinGrid,
            mean: Vec::with_capacity(BIN_COUNT),
            stderr: Vec::with_capacity(BIN_COUNT),
            sample_counts: vec![0; BIN_COUNT],
            censored_counts: vec![0; BIN_COUNT],
            infinite_replications: vec![0; BIN_COUNT],
            replications: estimates.len(),
        };
        for i in 0..BIN_COUNT {
            let mut finite = Vec::new();
            let mut present = 0;
            for est in estimates {
                out.sample_counts[i] += est.sample_counts[i];
                out.censored_counts[i] += est.censored_counts[i];
                if let Some(v) = est.values[i] {
                    present += 1;
                    if v.is_finite() {
                        finite.push(v);
                    } else {
                        out.infinite_replications[i] += 1;
                    }
                }
            }
            let (mean, se) = if present > 0 && 2 * out.infinite_replications[i] > present {
                (Some(f64::INFINITY), None)
            } else {
                mean_and_stderr(&finite)
            };
            out.mean.push(mean);
            out.stderr.push(se);
        }
        Ok(out)
    }

    /// The cross-replication means as a [`BinnedEstimate`], for interpolation
    /// and comparison.
    pub fn as_estimate(&self) -> BinnedEstimate {
        BinnedEstimate {
            grid: self.grid,
            values: self.mean.clone(),
            sample_counts: self.sample_counts.clone(),
            censored_counts: self.censored_counts.clone(),
        }
    }
}

fn mean_and_stderr(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = xs.len();
    if n == 0 {
        return (None, None);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some((var / n as f64).sqrt()))
}

/// Step function `t -> x_t(B)` reconstructed from the event log: the count
/// is `path[j].1` on `[path[j].0, path[j + 1].0)`. Starts at `(0, 0)`.
pub fn occupancy_path(trace: &SimTrace, b: &Interval) -> Vec<(f64, u64)> {
    let mut path = vec![(0.0, 0u64)];
    let mut count = 0u64;
    for e in &trace.events {
        let delta = match e.kind {
            EventKind::Arrival => 1i64,
            EventKind::Departure => -1,
            _ => continue,
        };
        if !b.contains(trace.customers[e.seq as usize].priority) {
            continue;
        }
        count = count.checked_add_signed(delta).expect("departure without arrival");
        match path.last_mut() {
            Some(last) if last.0 == e.time => last.1 = count,
            _ => path.push((e.time, count)),
        }
    }
    path
}

/// Fraction of `[0, horizon]` spent at each count `k = 0, 1, ...`.
pub fn time_average_distribution(path: &[(f64, u64)], horizon: f64) -> Vec<f64> {
    let mut dist: Vec<f64> = Vec::new();
    for (j, &(t, k)) in path.iter().enumerate() {
        let end = path.get(j + 1).map_or(horizon, |n| n.0).min(horizon);
        if end <= t {
            continue;
        }
        let k = k as usize;
        if dist.len() <= k {
            dist.resize(k + 1, 0.0);
        }
        dist[k] += end - t;
    }
    dist.iter_mut().for_each(|d| *d /= horizon);
    dist
}

/// Total-variation distance between an empirical distribution on
/// `{0, 1, ...}` and a geometric law, counting the law's tail beyond the
/// empirical support.
pub fn total_variation(empirical: &[f64], law: &GeometricLaw) -> f64 {
    let body: f64 = empirical
        .iter()
        .enumerate()
        .map(|(k, &e)| (e - law.pmf(k as u64)).abs())
        .sum();
    let tail = match empirical.len() {
        0 => 1.0,
        n => 1.0 - law.cdf(n as u64 - 1),
    };
    0.5 * (body + tail)
}

/// Continuous-time least-squares slope of a step function over `[t0, t1]`.
pub fn least_squares_slope(path: &[(f64, u64)], t0: f64, t1: f64) -> f64 {
    let centre = 0.5 * (t0 + t1);
    let stt = (t1 - t0).powi(3) / 12.0;
    let mut sxt = 0.0;
    for (j, &(t, k)) in path.iter().enumerate() {
        let end = path.get(j + 1).map_or(t1, |n| n.0).min(t1);
        let start = t.max(t0);
        if end <= start {
            continue;
        }
        sxt += k as f64 * ((end - centre).powi(2) - (start - centre).powi(2)) / 2.0;
    }
    sxt / stt
}

/// One row of an estimate-vs-theory table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub p: f64,
    pub estimate: Option<f64>,
    pub theory: f64,
    pub stderr: Option<f64>,
    pub sample_count: usize,
    pub censored_count: usize,
}

/// Estimate-vs-theory table at the 20 midpoints. Single-trace tables use the
/// columns `p,estimate,theory,sample_count,censored_count`; replicated tables
/// add `stderr_across_replications` after `theory`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateTable {
    pub metric: Metric,
    pub with_stderr: bool,
    pub rows: Vec<TableRow>,
}

pub const SINGLE_HEADER: &str = "p,estimate,theory,sample_count,censored_count";
pub const REPLICATED_HEADER: &str =
    "p,estimate,theory,stderr_across_replications,sample_count,censored_count";

impl EstimateTable {
    pub fn from_estimate(metric: Metric, est: &BinnedEstimate, params: &AnalyticParams) -> Self {
        let rows = (0..BIN_COUNT)
            .map(|i| {
                let p = est.grid.midpoint(i);
                TableRow {
                    p,
                    estimate: est.values[i],
                    theory: metric.theory(params, PriorityLevel::new(p).expect("midpoint in [0,1]")),
                    stderr: None,
                    sample_count: est.sample_counts[i],
                    censored_count: est.censored_counts[i],
                }
            })
            .collect();
        EstimateTable {
            metric,
            with_stderr: false,
            rows,
        }
    }

    pub fn from_replicated(metric: Metric, est: &ReplicatedEstimate, params: &AnalyticParams) -> Self {
        let mut table = Self::from_estimate(metric, &est.as_estimate(), params);
        table.with_stderr = true;
        for (row, se) in table.rows.iter_mut().zip(&est.stderr) {
            row.stderr = *se;
        }
        table
    }

    pub fn header(&self) -> &'static str {
        if self.with_stderr {
            REPLICATED_HEADER
        } else {
            SINGLE_HEADER
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(self.header());
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{},{}", r.p, fmt_opt(r.estimate), fmt_num(r.theory));
            if self.with_stderr {
                let _ = write!(out, ",{}", fmt_opt(r.stderr));
            }
            let _ = writeln!(out, ",{},{}", r.sample_count, r.censored_count);
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut row = json!({
                    "p": r.p,
                    "estimate": json_opt(r.estimate),
                    "theory": json_num(r.theory),
                    "sample_count": r.sample_count,
                    "censored_count": r.censored_count,
                });
                if self.with_stderr {
                    row["stderr_across_replications"] = json_opt(r.stderr);
                }
                row
            })
            .collect();
        json!({ "metric": self.metric.symbol(), "rows": rows })
    }

    /// Parses CSV produced by [`EstimateTable::to_csv`].
    pub fn parse_csv(metric: Metric, text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty table")?;
        let with_stderr = match header {
            SINGLE_HEADER => false,
            REPLICATED_HEADER => true,
            other => return Err(format!("unexpected header {other:?}")),
        };
        let width = if with_stderr { 6 } else { 5 };
        let mut rows = Vec::new();
        for line in lines {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != width {
                return Err(format!("row {line:?} has {} cells, expected {width}", cells.len()));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
            let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
            let count = |s: &str| s.parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
            let tail = &cells[width - 2..];
            rows.push(TableRow {
                p: num(cells[0])?,
                estimate: opt(cells[1])?,
                theory: num(cells[2])?,
                stderr: if with_stderr { opt(cells[3])? } else { None },
                sample_count: count(tail[0])?,
                censored_count: count(tail[1])?,
            });
        }
        Ok(EstimateTable {
            metric,
            with_stderr,
            rows,
        })
    }
}

/// `inf` for infinities, shortest round-trip decimal otherwise.
pub fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{x}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

fn json_num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!("inf")
    }
}

fn json_opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, json_num)
}
