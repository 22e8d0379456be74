//! Statistical and structural properties of simulated traces.

use contprio::simulator::{run, run_replications, EventKind};
use contprio::{PointMeasure, PriorityLevel, SimConfig};

#[test]
fn busy_and_idle_time_partition_the_horizon() {
    for rho in [0.3, 0.75, 1.25] {
        let trace = run(&SimConfig::new(rho, 2_000.0, 11)).unwrap();
        let total = trace.busy_time + trace.idle_time;
        assert!((total - 2_000.0).abs() < 1e-6, "rho={rho}: {total}");
    }
}

#[test]
fn idle_fraction_near_one_minus_load() {
    let traces = run_replications(&SimConfig::new(0.6, 5_000.0, 77), 5).unwrap();
    let idle: f64 = traces.iter().map(|t| t.idle_time / t.horizon).sum::<f64>() / 5.0;
    assert!((idle - 0.4).abs() < 0.03, "idle fraction {idle}");
}

#[test]
fn arrival_counts_are_poisson() {
    let config = SimConfig::new(0.75, 1_000.0, 123).with_snapshots(contprio::SnapshotPolicy::None);
    let counts: Vec<f64> = run_replications(&config, 100)
        .unwrap()
        .iter()
        .map(|t| t.customers.len() as f64)
        .collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    assert!((mean - 750.0).abs() <= 3.0 * se, "mean {mean}, se {se}");
    assert!((var / 750.0 - 1.0).abs() < 0.35, "dispersion {}", var / 750.0);
}

#[test]
fn one_snapshot_per_arrival_taken_before_it() {
    let trace = run(&SimConfig::new(0.9, 500.0, 3)).unwrap();
    assert_eq!(trace.snapshots.len(), trace.customers.len());
    for (snap, c) in trace.snapshots.iter().zip(&trace.customers) {
        assert_eq!(snap.time, c.arrival);
        assert!(!snap.priorities.contains(&c.priority));
    }
}

#[test]
fn service_always_goes_to_the_highest_priority() {
    let trace = run(&SimConfig::new(0.9, 500.0, 8)).unwrap();
    let mut state = PointMeasure::new();
    let mut serving = None;
    for e in &trace.events {
        let p = PriorityLevel::new(trace.customers[e.seq as usize].priority).unwrap();
        match e.kind {
            EventKind::Arrival => state.insert(p, e.seq),
            EventKind::ServiceStart => {
                assert_eq!(state.peek_max().map(|(_, s)| s), Some(e.seq));
                serving = Some(e.seq);
            }
            EventKind::Preemption => {
                assert_eq!(serving, Some(e.seq));
                serving = None;
            }
            EventKind::Departure => {
                assert_eq!(serving, Some(e.seq));
                assert!(state.remove(p, e.seq));
                serving = None;
            }
        }
    }
}

#[test]
fn departed_customers_have_consistent_times() {
    let trace = run(&SimConfig::new(1.25, 1_000.0, 4)).unwrap();
    assert!(trace.censored_count() > 0);
    for c in &trace.customers {
        match (c.last_service_entry, c.departure) {
            (Some(entry), Some(dep)) => {
                assert!(c.arrival <= entry && entry < dep && dep <= trace.horizon);
                assert!(c.waiting().unwrap() <= c.sojourn().unwrap());
            }
            (_, None) => assert!(c.is_censored()),
            (None, Some(_)) => panic!("departure without service: {c:?}"),
        }
    }
}
