//! The queue state as a point measure on [0, 1]: count queries and
//! service order.
//!
//! `cargo run --example point_measure`

use contprio::{Interval, PointMeasure, PriorityLevel};

fn main() {
    let mut state: PointMeasure = [0.1, 0.4, 0.4, 0.75, 0.9]
        .into_iter()
        .enumerate()
        .map(|(seq, p)| (PriorityLevel::new(p).unwrap(), seq as u64))
        .collect();

    let half = PriorityLevel::new(0.5).unwrap();
    println!("atoms:           {:?}", state.sorted_priorities());
    println!("X(0.5)    = {}", state.cdf_count(half));
    println!("Xbar(0.5) = {}", state.ccdf_count(half));
    for b in [Interval::closed(0.4, 0.75).unwrap(), Interval::open(0.4, 0.75).unwrap()] {
        println!("x({b}) = {}", state.interval_count(&b));
    }

    // Equal priorities leave in arrival order.
    while let Ok((p, seq)) = state.remove_max() {
        println!("serve customer {seq} at priority {}", p.value());
    }
}
