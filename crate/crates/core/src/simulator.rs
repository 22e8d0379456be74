//! Event-driven simulation of the preemptive single-server queue with
//! continuous priority levels.
//!
//! Arrivals are Poisson(`rho`), service requirements are exponential with
//! unit mean and priorities are U([0, 1]). The highest-priority customer
//! present is always in service; an arrival with a higher priority preempts
//! immediately. A preempted customer draws a fresh exponential residual when
//! it re-enters service, which is exact by memorylessness.
//!
//! The run starts empty at `t = 0` and stops at the horizon `T`. Arrivals at
//! `t <= T` are admitted; customers still present at `T` are censored.

use std::io::{self, Write};

use serde_json::{json, Value};

use crate::analytic::QuantileMap;
use crate::error::SimError;
use crate::measure_state::{PointMeasure, PriorityLevel};
use crate::streams::{replicate_seed, DrawSource, SeededStreams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnapshotPolicy {
    /// Record the state immediately before every arrival.
    #[default]
    Pasta,
    None,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub rho: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Relabels priorities for record-keeping only; scheduling always uses
    /// the underlying uniform level.
    pub priority_map: Option<QuantileMap>,
    pub snapshot_policy: SnapshotPolicy,
}

impl SimConfig {
    pub fn new(rho: f64, horizon: f64, seed: u64) -> Self {
        SimConfig {
            rho,
            horizon,
            seed,
            priority_map: None,
            snapshot_policy: SnapshotPolicy::Pasta,
        }
    }

    pub fn with_priority_map(mut self, map: QuantileMap) -> Self {
        self.priority_map = Some(map);
        self
    }

    pub fn with_snapshots(mut self, policy: SnapshotPolicy) -> Self {
        self.snapshot_policy = policy;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "rho must be positive and finite, got {}",
                self.rho
            )));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Ledger entry for one customer.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomerRecord {
    /// Arrival index, starting at 0.
    pub seq: u64,
    /// Uniform priority level used for scheduling.
    pub priority: f64,
    /// Priority after the configured quantile map, if any.
    pub mapped_priority: Option<f64>,
    pub arrival: f64,
    /// Start of the most recent service entry; `None` if never served.
    pub last_service_entry: Option<f64>,
    /// `None` when the customer was still present at the horizon.
    pub departure: Option<f64>,
}

impl CustomerRecord {
    pub fn is_censored(&self) -> bool {
        self.departure.is_none()
    }

    /// Arrival to final departure.
    pub fn sojourn(&self) -> Option<f64> {
        self.departure.map(|d| d - self.arrival)
    }

    /// Arrival to the start of the last service entry, for departed
    /// customers. Time spent in service before a preemption counts.
    pub fn waiting(&self) -> Option<f64> {
        self.departure?;
        self.last_service_entry.map(|s| s - self.arrival)
    }

    /// Priority as reported to users: mapped if a map was configured.
    pub fn reported_priority(&self) -> f64 {
        self.mapped_priority.unwrap_or(self.priority)
    }
}

/// State observed immediately before an arrival.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    /// Uniform priority levels present, ascending.
    pub priorities: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Arrival,
    ServiceStart,
    Preemption,
    Departure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone)]
pub struct SimTrace {
    pub rho: f64,
    pub horizon: f64,
    pub seed: u64,
    pub customers: Vec<CustomerRecord>,
    pub snapshots: Vec<Snapshot>,
    pub events: Vec<Event>,
    /// Time in `[0, T]` during which the system was nonempty.
    pub busy_time: f64,
    pub idle_time: f64,
}

impl SimTrace {
    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    pub fn censored_count(&self) -> usize {
        self.customers.iter().filter(|c| c.is_censored()).count()
    }

    /// One JSON object per customer:
    /// `{"seq", "priority", "arrival", "last_service_entry" | "never", "departure" | "censored"}`.
    pub fn write_customers_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for c in &self.customers {
            let line = json!({
                "seq": c.seq,
                "priority": c.reported_priority(),
                "arrival": c.arrival,
                "last_service_entry": c.last_service_entry.map_or(Value::from("never"), Value::from),
                "departure": c.departure.map_or(Value::from("censored"), Value::from),
            });
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// One JSON object per PASTA snapshot: `{"time", "priorities": [...]}`.
    pub fn write_snapshots_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for s in &self.snapshots {
            writeln!(out, "{}", json!({ "time": s.time, "priorities": s.priorities }))?;
        }
        Ok(())
    }
}

/// Runs one replication with seeded random streams.
pub fn run(config: &SimConfig) -> Result<SimTrace, SimError> {
    config.validate()?;
    let mut streams = SeededStreams::new(config.seed, config.rho)?;
    run_with(config, &mut streams)
}

/// Runs one replication drawing from an arbitrary source. `config.seed` is
/// only echoed into the trace.
pub fn run_with(config: &SimConfig, draws: &mut impl DrawSource) -> Result<SimTrace, SimError> {
    config.validate()?;
    Engine::new(config).run(draws)
}

/// Runs `n` independent replications with seeds `seed, seed + 1, ...`.
pub fn run_replications(config: &SimConfig, n: usize) -> Result<Vec<SimTrace>, SimError> {
    replications(config, n)?.collect()
}

/// Lazy form of [`run_replications`]: traces are produced one at a time so
/// callers can reduce each one before the next is simulated.
pub fn replications(
    config: &SimConfig,
    n: usize,
) -> Result<impl Iterator<Item = Result<SimTrace, SimError>> + '_, SimError> {
    if n == 0 {
        return Err(SimError::NoReplications);
    }
    config.validate()?;
    Ok((0..n as u64).map(move |i| {
        let cfg = config.clone().with_seed(replicate_seed(config.seed, i));
        run(&cfg)
    }))
}

struct Engine<'a> {
    config: &'a SimConfig,
    now: f64,
    state: PointMeasure,
    /// Customer in service and its scheduled completion time.
    in_service: Option<(u64, f64)>,
    customers: Vec<CustomerRecord>,
    snapshots: Vec<Snapshot>,
    events: Vec<Event>,
    busy_time: f64,
    idle_time: f64,
}

impl<'a> Engine<'a> {
    fn new(config: &'a SimConfig) -> Self {
        Engine {
            config,
            now: 0.0,
            state: PointMeasure::new(),
            in_service: None,
            customers: Vec::new(),
            snapshots: Vec::new(),
            events: Vec::new(),
            busy_time: 0.0,
            idle_time: 0.0,
        }
    }

    fn run(mut self, draws: &mut impl DrawSource) -> Result<SimTrace, SimError> {
        let horizon = self.config.horizon;
        let mut next_arrival = next_gap(draws)?;

        loop {
            let arrival = next_arrival.filter(|&a| a <= horizon);
            let departure = self.in_service.map(|(_, d)| d).filter(|&d| d <= horizon);
            match (arrival, departure) {
                (None, None) => break,
                // Departures win ties.
                (Some(a), Some(d)) if d <= a => self.depart(d, draws)?,
                (Some(a), _) => {
                    self.arrive(a, draws)?;
                    next_arrival = next_gap(draws)?.map(|gap| a + gap);
                }
                (None, Some(d)) => self.depart(d, draws)?,
            }
        }
        self.advance_to(horizon);

        Ok(SimTrace {
            rho: self.config.rho,
            horizon,
            seed: self.config.seed,
            customers: self.customers,
            snapshots: self.snapshots,
            events: self.events,
            busy_time: self.busy_time,
            idle_time: self.idle_time,
        })
    }

    fn advance_to(&mut self, t: f64) {
        let span = t - self.now;
        if self.state.is_empty() {
            self.idle_time += span;
        } else {
            self.busy_time += span;
        }
        self.now = t;
    }

    fn arrive(&mut self, t: f64, draws: &mut impl DrawSource) -> Result<(), SimError> {
        self.advance_to(t);
        if self.config.snapshot_policy == SnapshotPolicy::Pasta {
            self.snapshots.push(Snapshot {
                time: t,
                priorities: self.state.sorted_priorities(),
            });
        }

        let seq = self.customers.len() as u64;
        let level = PriorityLevel::new(draws.priority()?)?;
        self.customers.push(CustomerRecord {
            seq,
            priority: level.value(),
            mapped_priority: self.config.priority_map.as_ref().map(|m| m.apply(level)),
            arrival: t,
            last_service_entry: None,
            departure: None,
        });
        self.state.insert(level, seq);
        self.log(t, seq, EventKind::Arrival);

        if self.state.peek_max().map(|(_, s)| s) == Some(seq) {
            if let Some((current, _)) = self.in_service {
                self.log(t, current, EventKind::Preemption);
            }
            self.start_service(seq, draws)?;
        }
        Ok(())
    }

    fn depart(&mut self, t: f64, draws: &mut impl DrawSource) -> Result<(), SimError> {
        self.advance_to(t);
        let (_, seq) = self.state.remove_max()?;
        debug_assert_eq!(self.in_service.map(|(s, _)| s), Some(seq));
        self.customers[seq as usize].departure = Some(t);
        self.in_service = None;
        self.log(t, seq, EventKind::Departure);
        draws.release(seq);

        if let Some((_, next)) = self.state.peek_max() {
            self.start_service(next, draws)?;
        }
        Ok(())
    }

    fn start_service(&mut self, seq: u64, draws: &mut impl DrawSource) -> Result<(), SimError> {
        let duration = draws.service(seq)?;
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "service draw {duration} for customer {seq} is not a finite nonnegative time"
            )));
        }
        let t = self.now;
        self.customers[seq as usize].last_service_entry = Some(t);
        self.in_service = Some((seq, t + duration));
        self.log(t, seq, EventKind::ServiceStart);
        Ok(())
    }

    fn log(&mut self, time: f64, seq: u64, kind: EventKind) {
        self.events.push(Event { time, seq, kind });
    }
}

fn next_gap(draws: &mut impl DrawSource) -> Result<Option<f64>, SimError> {
    match draws.interarrival()? {
        Some(gap) if !(gap.is_finite() && gap >= 0.0) => Err(SimError::InvalidConfig(format!(
            "interarrival draw {gap} is not a finite nonnegative time"
        ))),
        other => Ok(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::ScriptedDraws;

    fn hand_traced() -> SimTrace {
        let config = SimConfig::new(1.0, 10.0, 0);
        let mut script = ScriptedDraws::new(
            vec![1.0, 1.0],
            vec![0.3, 0.7],
            vec![vec![2.0, 0.7], vec![0.5]],
        );
        run_with(&config, &mut script).unwrap()
    }

    #[test]
    fn hand_traced_preemption() {
        let trace = hand_traced();
        let c1 = &trace.customers[0];
        let c2 = &trace.customers[1];
        assert_eq!(c2.last_service_entry, Some(2.0));
        assert_eq!(c2.departure, Some(2.5));
        assert_eq!(c1.last_service_entry, Some(2.5));
        assert!((c1.departure.unwrap() - 3.2).abs() < 1e-12);
        assert_eq!(c1.waiting(), Some(1.5));
        assert!((c1.sojourn().unwrap() - 2.2).abs() < 1e-12);
        assert_eq!(c2.waiting(), Some(0.0));
        assert_eq!(c2.sojourn(), Some(0.5));

        use EventKind::*;
        let kinds: Vec<(u64, EventKind)> = trace.events.iter().map(|e| (e.seq, e.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                (0, Arrival),
                (0, ServiceStart),
                (1, Arrival),
                (0, Preemption),
                (1, ServiceStart),
                (1, Departure),
                (0, ServiceStart),
                (0, Departure),
            ]
        );
        assert!((trace.busy_time - 2.2).abs() < 1e-12);
        assert!((trace.idle_time - 7.8).abs() < 1e-12);
    }

    #[test]
    fn hand_traced_snapshots_exclude_arriving_customer() {
        let trace = hand_traced();
        assert_eq!(trace.snapshots.len(), 2);
        assert_eq!(trace.snapshots[0].priorities, Vec::<f64>::new());
        assert_eq!(trace.snapshots[1].priorities, vec![0.3]);
        assert_eq!(trace.snapshots[1].time, 2.0);
    }

    #[test]
    fn empty_arrival_stream() {
        let config = SimConfig::new(0.5, 100.0, 0);
        let trace = run_with(&config, &mut ScriptedDraws::empty()).unwrap();
        assert!(trace.customers.is_empty());
        assert!(trace.snapshots.is_empty());
        assert_eq!(trace.event_count(), 0);
        assert_eq!(trace.idle_time, 100.0);
    }

    #[test]
    fn arrival_exactly_at_horizon_is_admitted() {
        let config = SimConfig::new(1.0, 2.0, 0);
        let mut script = ScriptedDraws::new(vec![2.0, 0.1], vec![0.5], vec![vec![1.0]]);
        let trace = run_with(&config, &mut script).unwrap();
        assert_eq!(trace.customers.len(), 1);
        let c = &trace.customers[0];
        assert_eq!(c.last_service_entry, Some(2.0));
        assert!(c.is_censored());
        assert_eq!(c.waiting(), None);
        assert_eq!(c.sojourn(), None);
    }

    #[test]
    fn customers_waiting_at_horizon_are_never_served() {
        let config = SimConfig::new(1.0, 3.0, 0);
        let mut script = ScriptedDraws::new(
            vec![1.0, 0.5],
            vec![0.9, 0.1],
            vec![vec![5.0], vec![1.0]],
        );
        let trace = run_with(&config, &mut script).unwrap();
        assert_eq!(trace.customers[1].last_service_entry, None);
        assert_eq!(trace.censored_count(), 2);
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(run(&SimConfig::new(0.0, 10.0, 1)).is_err());
        assert!(run(&SimConfig::new(1.0, f64::INFINITY, 1)).is_err());
        assert!(run(&SimConfig::new(f64::NAN, 10.0, 1)).is_err());
        assert!(matches!(
            run_replications(&SimConfig::new(1.0, 10.0, 1), 0),
            Err(SimError::NoReplications)
        ));
    }

    #[test]
    fn scripted_priority_out_of_range_is_an_error() {
        let config = SimConfig::new(1.0, 5.0, 0);
        let mut script = ScriptedDraws::new(vec![1.0], vec![1.5], vec![vec![1.0]]);
        assert!(run_with(&config, &mut script).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let config = SimConfig::new(0.9, 500.0, 42);
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        assert_eq!(a.customers, b.customers);
        assert_eq!(a.snapshots, b.snapshots);
        assert_eq!(a.events, b.events);
    }

    #[test]
    fn replications_use_distinct_seeds() {
        let config = SimConfig::new(0.75, 200.0, 5);
        let reps = run_replications(&config, 2).unwrap();
        assert_eq!(reps[0].customers, run(&config).unwrap().customers);
        assert_ne!(reps[0].customers[0].arrival, reps[1].customers[0].arrival);
        assert_eq!(reps[1].seed, 6);
    }

    #[test]
    fn jsonl_export() {
        let trace = hand_traced();
        let mut buf = Vec::new();
        trace.write_customers_jsonl(&mut buf).unwrap();
        let lines: Vec<Value> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1]["seq"], 1);
        assert_eq!(lines[1]["departure"], 2.5);

        let config = SimConfig::new(1.0, 1.5, 0);
        let mut script = ScriptedDraws::new(vec![1.0, 0.1], vec![0.2, 0.1], vec![vec![9.0], vec![1.0]]);
        let censored = run_with(&config, &mut script).unwrap();
        let mut buf = Vec::new();
        censored.write_customers_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(rows[0]["departure"], "censored");
        assert_eq!(rows[1]["last_service_entry"], "never");

        let mut buf = Vec::new();
        censored.write_snapshots_jsonl(&mut buf).unwrap();
        let snaps: Vec<Value> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(snaps[1]["priorities"], json!([0.2]));
    }
}
