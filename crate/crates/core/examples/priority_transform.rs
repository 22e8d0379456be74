//! Relabelling priorities through a monotone map leaves the dynamics
//! unchanged: the same customers are served in the same order at the same
//! times.
//!
//! `cargo run --example priority_transform`

use contprio::simulator::run;
use contprio::{QuantileMap, SimConfig, SnapshotPolicy};

fn main() {
    let base = SimConfig::new(1.25, 1_000.0, 21).with_snapshots(SnapshotPolicy::None);
    let uniform = run(&base).unwrap();
    for map in [QuantileMap::exponential(2.0), QuantileMap::power(3.0)] {
        let mapped = run(&base.clone().with_priority_map(map.clone())).unwrap();
        let same = uniform.events == mapped.events;
        let example = &mapped.customers[0];
        println!(
            "{:<16} identical event log: {same}; customer 0 priority {:.4} reported as {:.4}",
            map.name(),
            example.priority,
            example.reported_priority()
        );
    }
}
