//! Overloaded queue at rho = 1.25. Priorities above p* = 0.2 settle,
//! while the band [0, 0.15] grows roughly linearly in time.
//!
//! `cargo run --release --example overloaded_regime`

use contprio::estimators::{fmt_num, least_squares_slope, occupancy_path};
use contprio::experiment::run_experiment;
use contprio::{InfinityMode, Interval, Metric, SimConfig};

fn main() {
    let horizon = 1e4;
    let band = Interval::closed(0.0, 0.15).unwrap();
    let mut slopes = Vec::new();
    let config = SimConfig::new(1.25, horizon, 7);
    let outcome = run_experiment(&config, 10, |trace| {
        slopes.push(least_squares_slope(&occupancy_path(trace, &band), horizon / 2.0, horizon));
    })
    .unwrap();

    let included = outcome.table(Metric::Sojourn, InfinityMode::Include);
    let excluded = outcome.table(Metric::Sojourn, InfinityMode::Exclude);
    println!("{:>6} {:>12} {:>12} {:>12}", "p", "s include", "s exclude", "theory");
    for (inc, exc) in included.rows.iter().zip(&excluded.rows) {
        let show = |x: Option<f64>| match x {
            Some(v) if v.is_finite() => format!("{v:.4}"),
            Some(_) => "inf".to_string(),
            None => "-".to_string(),
        };
        println!(
            "{:>6} {:>12} {:>12} {:>12}",
            fmt_num(inc.p),
            show(inc.estimate),
            show(exc.estimate),
            show(Some(inc.theory))
        );
    }
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    println!("growth rate of x_t([0, 0.15]) on [T/2, T]: {mean:.4} per unit time");
}
