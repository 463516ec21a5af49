//! Command-line front end: simulate, train, evaluate, predict. Each stage
//! reads only files written by earlier stages plus the config, so a run can
//! be reproduced piecewise from its artifacts.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, SplitKind};
use crate::eval::{render_report_text, run_cross_validation, write_report_csv, write_report_text, SplitMode};
use crate::injector::{build_schedule, write_schedule_csv};
use crate::pipeline::{fit_full, predict_at_tick, ModelBundle};
use crate::rng::RngStream;
use crate::sim::simulate_dataset;
use crate::telemetry::{
    read_dataset_csv, read_schema, write_dataset_csv, write_schema, DatasetTable, FaultLabel,
    Schema,
};
use crate::{Error, Result};

pub const DATASET_FILE: &str = "dataset.csv";
pub const SCHEDULE_FILE: &str = "schedule.csv";
pub const SCHEMA_FILE: &str = "schema.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const REPORT_CSV_FILE: &str = "report.csv";
pub const REPORT_TEXT_FILE: &str = "report.txt";

#[derive(Debug, Parser)]
#[command(
    name = "faultcast",
    version,
    about = "Telemetry simulation and ahead-of-time fault classification"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Build a fault schedule and simulate a labeled telemetry dataset.
    Simulate(SimulateArgs),
    /// Train the forecasting and classification models on a full dataset.
    Train(TrainArgs),
    /// Cross-validate the pipeline and write per-fold and averaged reports.
    Evaluate(EvaluateArgs),
    /// Classify the window ending at a tick; the label refers to tick+m.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file. Omit to run with built-in defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Root seed, overriding the config's `seed`.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory for dataset.csv, schedule.csv, and schema.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Directory holding dataset.csv and schema.csv (a simulate output).
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Output directory for the model bundle and manifest.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    /// Directory holding dataset.csv and schema.csv (a simulate output).
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Output directory for report.csv and report.txt.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    /// Directory holding the trained model bundle (a train output).
    #[arg(long, value_name = "DIR")]
    model: PathBuf,
    /// Directory holding dataset.csv and schema.csv (a simulate output).
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Row index the input window ends at; the prediction is for tick+m.
    #[arg(long, value_name = "INT")]
    tick: usize,
}

/// Parse arguments and dispatch. Returns the process exit code. Clap exits
/// with 2 on usage errors by default; this tool reserves 2 for runtime
/// failures and uses 1 for anything wrong with the invocation or config,
/// so the code is remapped here.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too; those are not errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Config(_) | Error::InvalidArgument { .. } => 1,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Simulate(args) => cmd_simulate(&args.common.load()?, &args.out),
        Cmd::Train(args) => cmd_train(&args.common.load()?, &args.data, &args.out),
        Cmd::Evaluate(args) => cmd_evaluate(&args.common.load()?, &args.data, &args.out),
        Cmd::Predict(args) => cmd_predict(&args.common.load()?, &args.model, &args.data, args.tick),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_dataset(data_dir: &Path) -> Result<(Schema, DatasetTable)> {
    let schema = read_schema(&data_dir.join(SCHEMA_FILE))?;
    let table = read_dataset_csv(&data_dir.join(DATASET_FILE), &schema)?;
    Ok((schema, table))
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let sim_cfg = cfg.sim_config()?;
    let schema = sim_cfg.schema()?;
    let profile = cfg.traffic_profile();

    let mut rng = RngStream::derive(cfg.seed, "schedule", 0);
    let schedule = build_schedule(
        &mut rng,
        &sim_cfg.topology.containers(),
        sim_cfg.duration_s,
        cfg.simulation.lambda_per_min,
    )?;
    let table = simulate_dataset(&sim_cfg, &profile, &schedule)?;

    ensure_dir(out)?;
    write_dataset_csv(&out.join(DATASET_FILE), &table, &schema)?;
    write_schedule_csv(&out.join(SCHEDULE_FILE), &schedule)?;
    write_schema(&out.join(SCHEMA_FILE), &schema)?;

    let hist = table.label_histogram();
    let parts: Vec<String> = FaultLabel::ALL
        .iter()
        .map(|l| format!("{}={}", l.name(), hist[l.code() as usize]))
        .collect();
    println!("ticks: {}", table.rows());
    println!("episodes: {}", schedule.episodes.len());
    println!("labels: {}", parts.join(" "));
    println!("wrote {DATASET_FILE}, {SCHEDULE_FILE}, {SCHEMA_FILE} to {}", out.display());
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, data_dir: &Path, out: &Path) -> Result<()> {
    let (schema, table) = load_dataset(data_dir)?;
    let pipe = cfg.pipeline_config();
    let fold = fit_full(&table, &pipe, cfg.seed)?;
    let bundle = ModelBundle::from_fold(&fold);

    ensure_dir(out)?;
    bundle.save(out, &schema)?;
    write_manifest(&out.join(MANIFEST_FILE), cfg)?;

    println!("windows: {}", fold.windows().len());
    if let (Some(first), Some(last)) = (fold.lstm_loss.first(), fold.lstm_loss.last()) {
        println!("forecaster mse: epoch 1 {first:.6e}, final {last:.6e}");
    }
    if let Some(oob) = fold.oob_accuracy {
        println!("forest oob accuracy: {oob:.4}");
    }
    println!("wrote model bundle and {MANIFEST_FILE} to {}", out.display());
    Ok(())
}

pub fn cmd_evaluate(cfg: &RunConfig, data_dir: &Path, out: &Path) -> Result<()> {
    let (_, table) = load_dataset(data_dir)?;
    let pipe = cfg.pipeline_config();
    let mode = match cfg.evaluation.split {
        SplitKind::Stratified => SplitMode::Stratified,
        SplitKind::TimeBlocked => SplitMode::TimeBlocked,
    };
    let report = run_cross_validation(&table, &pipe, cfg.evaluation.k_folds, mode, cfg.seed)?;

    ensure_dir(out)?;
    write_report_csv(&out.join(REPORT_CSV_FILE), &report)?;
    write_report_text(&out.join(REPORT_TEXT_FILE), &report)?;
    print!("{}", render_report_text(&report));
    println!("wrote {REPORT_CSV_FILE} and {REPORT_TEXT_FILE} to {}", out.display());
    Ok(())
}

pub fn cmd_predict(cfg: &RunConfig, model_dir: &Path, data_dir: &Path, tick: usize) -> Result<()> {
    check_manifest(&model_dir.join(MANIFEST_FILE), cfg)?;
    let (schema, table) = load_dataset(data_dir)?;
    let bundle = ModelBundle::load(model_dir, &schema)?;
    let p = predict_at_tick(&bundle, &table, cfg.pipeline.k, cfg.pipeline.m, tick)?;

    let probs: Vec<String> = FaultLabel::ALL
        .iter()
        .map(|l| format!("{}={:.4}", l.name(), p.probabilities[l.code() as usize]))
        .collect();
    println!("tick: {}", p.anchor);
    println!("target row: {}", p.target_row);
    println!("label: {} (code {})", p.label.name(), p.label.code());
    println!("probabilities: {}", probs.join(" "));
    Ok(())
}

/// Key-value manifest pinning what the bundle was trained with. The config
/// hash covers every field including the seed, so retraining with the same
/// effective config reproduces the manifest byte for byte.
fn write_manifest(path: &Path, cfg: &RunConfig) -> Result<()> {
    let text = format!(
        "config_hash={:016x}\nseed={}\nk={}\nm={}\npca_r={}\nlstm_hidden={}\n",
        cfg.hash(),
        cfg.seed,
        cfg.pipeline.k,
        cfg.pipeline.m,
        cfg.pipeline.pca_r,
        cfg.pipeline.lstm_hidden,
    );
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Guard against predicting with window geometry the bundle was not trained
/// for: mismatched k or m would not fail dimensionally (the network accepts
/// any sequence length) but would silently change what the output means.
fn check_manifest(path: &Path, cfg: &RunConfig) -> Result<()> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        // Hand-assembled bundles without a manifest are accepted as-is.
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let expected = [
        ("k", cfg.pipeline.k),
        ("m", cfg.pipeline.m),
        ("pca_r", cfg.pipeline.pca_r),
        ("lstm_hidden", cfg.pipeline.lstm_hidden),
    ];
    for line in text.lines() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        for (name, want) in expected {
            if key == name && value != want.to_string() {
                return Err(Error::Config(format!(
                    "model was trained with {name}={value} but the config says {name}={want}"
                )));
            }
        }
    }
    Ok(())
}
