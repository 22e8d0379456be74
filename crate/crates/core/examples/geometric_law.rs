//! Time-averaged law of the number of customers above p = 0.5 against its
//! geometric equilibrium law.
//!
//! `cargo run --release --example geometric_law`

use contprio::estimators::{occupancy_path, time_average_distribution, total_variation};
use contprio::{AnalyticParams, Interval, PriorityLevel, SimConfig, SnapshotPolicy};

fn main() {
    let (rho, horizon) = (0.75, 1e5);
    let config = SimConfig::new(rho, horizon, 3).with_snapshots(SnapshotPolicy::None);
    let trace = contprio::simulator::run(&config).unwrap();

    let above = Interval::open_closed(0.5, 1.0).unwrap();
    let empirical = time_average_distribution(&occupancy_path(&trace, &above), horizon);
    let law = AnalyticParams::new(rho)
        .unwrap()
        .ccdf_equilibrium_law(PriorityLevel::new(0.5).unwrap());

    println!("{:>3} {:>10} {:>10}", "k", "empirical", "geometric");
    for (k, e) in empirical.iter().enumerate().take(8) {
        println!("{k:>3} {e:>10.5} {:>10.5}", law.pmf(k as u64));
    }
    println!("total variation distance: {:.5}", total_variation(&empirical, &law));
}
