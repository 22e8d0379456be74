//! Writes one replication as JSON lines: customer records and the
//! snapshot taken before each arrival.
//!
//! `cargo run --example export_trace -- [dir]`

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use contprio::simulator::run;
use contprio::SimConfig;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let trace = run(&SimConfig::new(1.25, 200.0, 5)).expect("valid config");

    let customers = dir.join("customers.jsonl");
    let snapshots = dir.join("snapshots.jsonl");
    trace.write_customers_jsonl(BufWriter::new(File::create(&customers)?))?;
    trace.write_snapshots_jsonl(BufWriter::new(File::create(&snapshots)?))?;
    println!(
        "{} customers ({} censored) -> {}",
        trace.customers.len(),
        trace.censored_count(),
        customers.display()
    );
    println!("{} snapshots -> {}", trace.snapshots.len(), snapshots.display());
    Ok(())
}
