//! Fit the full forecasting pipeline plus both classifiers on one dataset
//! and compare the random forest against the AdaBoost baseline.
//!
//! The classifiers never see raw telemetry: they are trained on inverse-PCA
//! reconstructions of forecast latent rows, so that training and inference
//! consume exactly the same kind of input.
//!
//! Run with: cargo run --example classify

use faultcast::config::RunConfig;
use faultcast::eval::ConfusionMatrix;
use faultcast::injector::build_schedule;
use faultcast::pipeline::fit_full;
use faultcast::rng::RngStream;
use faultcast::sim::simulate_dataset;
use faultcast::telemetry::FaultLabel;

fn main() -> faultcast::Result<()> {
    // A compact run: one pair, ninety minutes, light models.
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
    println!("trained on {} windows", fold.windows().len());
    if let Some(oob) = fold.oob_accuracy {
        println!("forest out-of-bag accuracy: {oob:.4}");
    }

    // Training-set confusion: how the two classifiers see the same windows.
    let indices: Vec<usize> = (0..fold.windows().len()).collect();
    let truth = fold.windows().labels_of(&indices);
    let (forest_pred, reconstructions) = fold.predict_windows(&indices)?;
    let ada_pred = fold.predict_adaboost_rows(&reconstructions)?;

    let agree = |pred: &[FaultLabel]| {
        pred.iter().zip(&truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
    };
    println!("forest accuracy:   {:.4}", agree(&forest_pred));
    println!("adaboost accuracy: {:.4}", agree(&ada_pred));

    let cm = ConfusionMatrix::from_pairs(&truth, &forest_pred)?;
    println!("\nforest confusion (rows = true):");
    for r in 0..4 {
        let row: Vec<String> = (0..4).map(|c| format!("{:>7.0}", cm.counts[r][c])).collect();
        println!("  {:<13} {}", FaultLabel::from_code(r as u8).unwrap().name(), row.join(" "));
    }
    Ok(())
}
