//! Compress a telemetry table with PCA and see how much structure survives.
//!
//! The pipeline min-max normalizes every column on training rows, then
//! projects onto the top principal components of the normalized table. Ten
//! components carry almost all of the variance of several hundred raw
//! metrics because the underlying drivers (load, stress level, link quality)
//! are few.
//!
//! Run with: cargo run --example reduce

use faultcast::injector::{build_schedule, DEFAULT_LAMBDA_PER_MIN};
use faultcast::pca::fit_pca;
use faultcast::preprocess::Normalizer;
use faultcast::rng::RngStream;
use faultcast::sim::{simulate_dataset, SimConfig, TrafficProfile};

fn main() -> faultcast::Result<()> {
    let cfg = SimConfig::new(11, 3600)?;
    let profile = TrafficProfile::diurnal();
    let mut rng = RngStream::derive(cfg.seed, "schedule", 0);
    let schedule = build_schedule(
        &mut rng,
        &cfg.topology.containers(),
        cfg.duration_s,
        DEFAULT_LAMBDA_PER_MIN,
    )?;
    let table = simulate_dataset(&cfg, &profile, &schedule)?;
    println!("raw table: {} rows x {} columns", table.rows(), table.cols());

    let all_rows: Vec<usize> = (0..table.rows()).collect();
    let normalizer = Normalizer::fit(&table.features, &all_rows)?;
    let normalized = normalizer.apply(&table.features);

    let model = fit_pca(&normalized.view(), 10)?;
    let total: f64 = model.explained_variance.iter().sum();
    println!("\ncomponent  eigenvalue  share of top-10 variance");
    for (i, v) in model.explained_variance.iter().enumerate() {
        println!("{i:>9}  {v:>10.5}  {:>5.1}%", 100.0 * v / total);
    }

    // Round-trip error: project to 10 dimensions and back.
    let reduced = model.transform(&normalized.view());
    let reconstructed = model.inverse_transform(&reduced.view());
    let mse = (&reconstructed - &normalized).mapv(|e| e * e).mean().unwrap();
    println!("\nreduced to {} columns; reconstruction mse {:.3e}", reduced.ncols(), mse);
    println!("component basis orthonormality defect {:.2e}", model.orthonormality_defect());
    Ok(())
}
