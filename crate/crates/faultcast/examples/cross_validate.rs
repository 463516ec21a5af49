//! Run the full stratified cross-validation protocol and print the report.
//!
//! Each fold retrains everything from scratch (normalizer, PCA, forecaster,
//! classifiers) on its training windows only, then scores the held-out
//! windows. The printed table is the same one `faultcast evaluate` writes.
//!
//! Run with: cargo run --example cross_validate

use faultcast::config::RunConfig;
use faultcast::eval::{render_report_text, run_cross_validation, SplitMode};
use faultcast::injector::build_schedule;
use faultcast::rng::RngStream;
use faultcast::sim::simulate_dataset;

fn main() -> faultcast::Result<()> {
    let cfg = RunConfig::from_toml_str(
        "seed = 9\n\
         [simulation]\n\
         duration_s = 5400\n\
         pairs = 1\n\
         platform_metrics_per_container = 9\n\
         infra_metrics = 10\n\
         [pipeline]\n\
         k = 30\n\
         m = 5\n\
         pca_r = 6\n\
         lstm_hidden = 16\n\
         lstm_epochs = 3\n\
         forest_trees = 30\n\
         forest_max_depth = 8\n\
         adaboost_rounds = 20\n\
         [evaluation]\n\
         k_folds = 3\n",
    )?;

    let sim_cfg = cfg.sim_config()?;
    let mut rng = RngStream::derive(cfg.seed, "schedule", 0);
    let schedule = build_schedule(
        &mut rng,
        &sim_cfg.topology.containers(),
        sim_cfg.duration_s,
        cfg.simulation.lambda_per_min,
    )?;
    let table = simulate_dataset(&sim_cfg, &cfg.traffic_profile(), &schedule)?;
    println!(
        "dataset: {} rows, histogram {:?}\n",
        table.rows(),
        table.label_histogram()
    );

    let report = run_cross_validation(
        &table,
        &cfg.pipeline_config(),
        cfg.evaluation.k_folds,
        SplitMode::Stratified,
        cfg.seed,
    )?;
    print!("{}", render_report_text(&report));

    println!("\nper-fold forecaster convergence:");
    for (i, fold) in report.folds.iter().enumerate() {
        println!(
            "  fold {i}: mse {:.5e} -> {:.5e} over {} epochs, rmse {:.5}",
            fold.lstm_loss.first().unwrap(),
            fold.lstm_loss.last().unwrap(),
            fold.lstm_loss.len(),
            fold.forecast_rmse
        );
    }
    Ok(())
}
