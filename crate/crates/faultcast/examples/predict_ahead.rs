//! Predict the fault state several seconds before it is observed.
//!
//! Trains on one dataset, then walks tick by tick across a fault onset and
//! asks the model about second t+m while standing at second t. Around the
//! boundary you can watch the prediction flip before the window itself is
//! fully inside the episode.
//!
//! Run with: cargo run --example predict_ahead

use faultcast::config::RunConfig;
use faultcast::injector::build_schedule;
use faultcast::pipeline::{fit_full, predict_at_tick, ModelBundle};
use faultcast::rng::RngStream;
use faultcast::sim::simulate_dataset;
use faultcast::telemetry::FaultLabel;

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
         adaboost_rounds = 20\n",
    )?;
    let (k, m) = (cfg.pipeline.k, cfg.pipeline.m);

    let sim_cfg = cfg.sim_config()?;
    let mut rng = RngStream::derive(cfg.seed, "schedule", 0);
    let schedule = build_schedule(
        &mut rng,
        &sim_cfg.topology.containers(),
        sim_cfg.duration_s,
        cfg.simulation.lambda_per_min,
    )?;
    let table = simulate_dataset(&sim_cfg, &cfg.traffic_profile(), &schedule)?;

    let fold = fit_full(&table, &cfg.pipeline_config(), cfg.seed)?;
    let bundle = ModelBundle::from_fold(&fold);

    // Find the first non-normal episode and scan across its onset.
    let onset = schedule
        .episodes
        .iter()
        .find(|e| e.effective_label() != FaultLabel::Normal)
        .map(|e| e.start_s as usize)
        .expect("this seed schedules at least one fault");
    println!("first fault onset at t = {onset} s; forecasting {m} s ahead\n");
    println!("{:>6}  {:>6}  {:<13} {:<13} confidence", "at t", "for", "predicted", "actual");

    for t in (onset - 15..onset + 15).step_by(3) {
        let p = predict_at_tick(&bundle, &table, k, m, t)?;
        let actual = table.labels[p.target_row];
        let confidence = p.probabilities[p.label.code() as usize];
        let marker = if p.label == actual { "" } else { "  <- miss" };
        println!(
            "{t:>6}  {:>6}  {:<13} {:<13} {confidence:.2}{marker}",
            p.target_row,
            p.label.name(),
            actual.name()
        );
    }
    Ok(())
}
