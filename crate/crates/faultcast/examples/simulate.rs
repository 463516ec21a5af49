//! Generate a labeled telemetry dataset and look at what comes out.
//!
//! The simulator emits radio metrics per DU at 100 ms cadence and platform
//! and host metrics at 1 s, then the alignment step averages everything onto
//! a one-row-per-second grid. Each row carries the fault label active at
//! that second.
//!
//! Run with: cargo run --example simulate

use faultcast::injector::{build_schedule, DEFAULT_LAMBDA_PER_MIN};
use faultcast::rng::RngStream;
use faultcast::sim::{run_simulation, simulate_dataset, SimConfig, TrafficProfile};
use faultcast::telemetry::FaultLabel;

fn main() -> faultcast::Result<()> {
    // Two CU/DU pairs, one hour, defaults otherwise.
    let mut cfg = SimConfig::new(4, 3600)?;
    cfg.topology = faultcast::sim::Topology::with_pairs(2)?;
    cfg.platform_metrics_per_container = 12;
    cfg.infra_metrics = 10;

    let profile = TrafficProfile::diurnal();
    let mut rng = RngStream::derive(cfg.seed, "schedule", 0);
    let schedule = build_schedule(
        &mut rng,
        &cfg.topology.containers(),
        cfg.duration_s,
        DEFAULT_LAMBDA_PER_MIN,
    )?;

    // The raw stream, before alignment: frames at native cadences.
    let (stream, _labels) = run_simulation(&cfg, &profile, &schedule)?;
    println!("first frames off the wire:");
    for frame in stream.take(6) {
        println!(
            "  t={:>5} ms  {:<22} {:.4}",
            frame.timestamp_ms,
            frame.column_id(),
            frame.value
        );
    }

    // The aligned table the models consume.
    let table = simulate_dataset(&cfg, &profile, &schedule)?;
    let schema = cfg.schema()?;
    println!("\naligned table: {} rows x {} columns", table.rows(), table.cols());
    let first: Vec<&str> = schema.columns().iter().take(4).map(|c| c.id.as_str()).collect();
    println!("first columns: {first:?}");

    let hist = table.label_histogram();
    for label in FaultLabel::ALL {
        println!("  {:<13} {:>5} rows", label.name(), hist[label.code() as usize]);
    }
    Ok(())
}
