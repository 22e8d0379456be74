//! Replicated simulation at rho = 0.75, written as estimate-vs-theory
//! tables for m, s and w.
//!
//! `cargo run --release --example stable_regime -- [horizon] [replications]`

use contprio::experiment::run_experiment;
use contprio::{InfinityMode, Metric, SimConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let horizon: f64 = args.next().map_or(1e4, |a| a.parse().expect("horizon"));
    let reps: usize = args.next().map_or(20, |a| a.parse().expect("replications"));

    let config = SimConfig::new(0.75, horizon, 1);
    let outcome = run_experiment(&config, reps, |_| {}).unwrap();
    for metric in Metric::ALL {
        println!("# {metric}");
        print!("{}", outcome.table(metric, InfinityMode::Exclude).to_csv());
    }
}
