//! A two-customer preemption scenario driven by scripted draws, printed as
//! an event log.
//!
//! `cargo run --example hand_trace`

use contprio::simulator::run_with;
use contprio::streams::ScriptedDraws;
use contprio::SimConfig;

fn main() {
    // Customer 0 arrives at 1 with priority 0.3 and needs 2.0; customer 1
    // arrives at 2 with priority 0.7 and needs 0.5. Customer 0 resamples
    // 0.7 when it re-enters service.
    let mut draws = ScriptedDraws::new(vec![1.0, 1.0], vec![0.3, 0.7], vec![vec![2.0, 0.7], vec![0.5]]);
    let trace = run_with(&SimConfig::new(1.0, 10.0, 0), &mut draws).unwrap();

    for e in &trace.events {
        println!("t={:<5} customer {} {:?}", e.time, e.seq, e.kind);
    }
    for c in &trace.customers {
        println!(
            "customer {}: priority {} sojourn {:.3} waiting {:.3}",
            c.seq,
            c.priority,
            c.sojourn().unwrap(),
            c.waiting().unwrap()
        );
    }
    println!("busy {:.3}, idle {:.3}", trace.busy_time, trace.idle_time);
}
