//! Closed-form steady-state curves for a stable and an overloaded queue.
//!
//! `cargo run --example theory_curves`

use contprio::estimators::fmt_num;
use contprio::{AnalyticParams, BinGrid, PriorityLevel};

fn main() {
    for rho in [0.75, 1.25] {
        let params = AnalyticParams::new(rho).unwrap();
        match params.critical_priority() {
            Some(p) => println!("rho = {rho}: priorities below p* = {p:.3} are starved"),
            None => println!("rho = {rho}: every priority level is stable"),
        }
        println!("{:>6} {:>10} {:>10} {:>10} {:>12}", "p", "m(p)", "s(p)", "w(p)", "E[Xbar(p)]");
        for p in BinGrid.midpoints().step_by(2) {
            let pl = PriorityLevel::new(p).unwrap();
            println!(
                "{:>6} {:>10} {:>10} {:>10} {:>12}",
                fmt_num(p),
                short(params.mean_density(pl)),
                short(params.sojourn(pl)),
                short(params.waiting(pl)),
                short(params.mean_ccdf(pl)),
            );
        }
        println!();
    }
}

fn short(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else {
        "inf".into()
    }
}
