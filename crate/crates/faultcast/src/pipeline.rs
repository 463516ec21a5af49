//! The shared modeling pipeline: normalize, reduce, forecast, reconstruct,
//! classify. Cross-validation, full-dataset training, and single-window
//! prediction all run through the functions here, so a prediction made by
//! the CLI is exactly the prediction the evaluation measured.
//!
//! Fitting is leakage-controlled: the normalizer and the PCA basis see only
//! the target rows of training windows. The classifier trains on the
//! forecaster's own reconstructed outputs rather than ground-truth rows, so
//! its training distribution matches what it sees at inference time.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;

use crate::forest::{
    fit_adaboost, fit_forest, predict_adaboost, read_forest, write_forest, AdaBoostModel,
    ForestModel, ForestParams,
};
use crate::lstm::{read_lstm, write_lstm, Lstm, LstmConfig};
use crate::pca::{fit_pca, read_pca, write_pca, PcaModel};
use crate::preprocess::{
    make_windows, read_normalizer, write_normalizer, Normalizer, WindowSet,
};
use crate::rng::RngStream;
use crate::telemetry::{DatasetTable, FaultLabel, Schema};
use crate::{Error, Result};

/// Everything the modeling stages need, independent of simulation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Window length: inputs span k+1 rows ending at the anchor.
    pub k: usize,
    /// Forecast horizon in rows past the anchor.
    pub m: usize,
    pub stride: usize,
    /// Retained principal components.
    pub pca_r: usize,
    pub lstm_hidden: usize,
    pub lstm_epochs: usize,
    pub lstm_batch_size: usize,
    pub lstm_learning_rate: f64,
    pub lstm_clip_norm: f64,
    pub forest: ForestParams,
    pub adaboost_rounds: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: 60,
            m: 5,
            stride: 1,
            pca_r: 10,
            lstm_hidden: 32,
            // The loss plateaus within a few epochs on simulated telemetry;
            // six keeps a full five-fold evaluation of the default ten-hour
            // run comfortably inside a coffee break on one core.
            lstm_epochs: 6,
            lstm_batch_size: 64,
            lstm_learning_rate: 1e-3,
            lstm_clip_norm: 5.0,
            forest: ForestParams::default(),
            adaboost_rounds: 50,
        }
    }
}

impl PipelineConfig {
    fn lstm_config(&self) -> LstmConfig {
        LstmConfig {
            input: self.pca_r,
            hidden: self.lstm_hidden,
            output: self.pca_r,
            epochs: self.lstm_epochs,
            batch_size: self.lstm_batch_size,
            learning_rate: self.lstm_learning_rate,
            clip_norm: self.lstm_clip_norm,
        }
    }
}

/// A fully fitted pipeline plus the reduced windows it was fitted over.
pub struct FoldModel {
    pub normalizer: Normalizer,
    pub pca: PcaModel,
    pub lstm: Lstm,
    pub forest: ForestModel,
    pub adaboost: AdaBoostModel,
    pub lstm_loss: Vec<f64>,
    pub oob_accuracy: Option<f64>,
    windows: WindowSet,
    normalized: Arc<Array2<f64>>,
}

/// Sorted unique target rows of the given windows; the rows the normalizer
/// and PCA are allowed to see.
fn training_rows(windows: &WindowSet, idx: &[usize]) -> Vec<usize> {
    let mut rows: Vec<usize> = idx.iter().map(|&i| windows.target_row(i)).collect();
    rows.sort_unstable();
    rows.dedup();
    rows
}

fn gather_rows(table: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), table.ncols()));
    for (j, &r) in rows.iter().enumerate() {
        out.row_mut(j).assign(&table.row(r));
    }
    out
}

/// Fit the whole pipeline on the training windows of one fold. `fold` only
/// namespaces the derived random streams so folds are independent.
pub fn fit_fold(
    table: &DatasetTable,
    train_idx: &[usize],
    cfg: &PipelineConfig,
    seed: u64,
    fold: u64,
) -> Result<FoldModel> {
    if train_idx.is_empty() {
        return Err(Error::invalid("train_idx", "no training windows"));
    }

    // Window geometry over the raw table; only labels and row indices are
    // used from this one.
    let raw_windows = make_windows(
        Arc::new(table.features.clone()),
        &table.labels,
        cfg.k,
        cfg.m,
        cfg.stride,
    )?;
    let fit_rows = training_rows(&raw_windows, train_idx);

    let normalizer = Normalizer::fit(&table.features, &fit_rows)?;
    let normalized = Arc::new(normalizer.apply(&table.features));

    let pca_input = gather_rows(&normalized, &fit_rows);
    let pca = fit_pca(&pca_input.view(), cfg.pca_r)?;
    let reduced = pca.transform(&normalized.view());

    let windows = make_windows(Arc::new(reduced), &table.labels, cfg.k, cfg.m, cfg.stride)?;

    let mut lstm = Lstm::new(
        cfg.lstm_config(),
        &mut RngStream::derive(seed, "lstm-init", fold),
    );
    let lstm_loss = lstm.train(
        &windows,
        train_idx,
        &mut RngStream::derive(seed, "lstm-train", fold),
    )?;

    // The classifier learns from what the forecaster actually emits.
    let forecasts = lstm.predict(&windows, train_idx);
    let recon_train = pca.inverse_transform(&forecasts.view());
    let train_labels = windows.labels_of(train_idx);
    let forest_seed = RngStream::derive(seed, "forest-seed", fold).next_u64();
    let (forest, oob_accuracy) =
        fit_forest(&recon_train.view(), &train_labels, &cfg.forest, forest_seed)?;
    let adaboost = fit_adaboost(&recon_train.view(), &train_labels, cfg.adaboost_rounds)?;

    Ok(FoldModel {
        normalizer,
        pca,
        lstm,
        forest,
        adaboost,
        lstm_loss,
        oob_accuracy,
        windows,
        normalized,
    })
}

/// Fit on every window: the non-CV training mode.
pub fn fit_full(table: &DatasetTable, cfg: &PipelineConfig, seed: u64) -> Result<FoldModel> {
    let raw_windows = make_windows(
        Arc::new(table.features.clone()),
        &table.labels,
        cfg.k,
        cfg.m,
        cfg.stride,
    )?;
    let all: Vec<usize> = (0..raw_windows.len()).collect();
    fit_fold(table, &all, cfg, seed, 0)
}

impl FoldModel {
    /// Reduced-space windows (geometry and labels match the raw table).
    pub fn windows(&self) -> &WindowSet {
        &self.windows
    }

    /// Forecast, reconstruct, and classify the given windows. Returns the
    /// predicted labels and the reconstructed normalized feature rows.
    pub fn predict_windows(&self, idx: &[usize]) -> Result<(Vec<FaultLabel>, Array2<f64>)> {
        let forecasts = self.lstm.predict(&self.windows, idx);
        let recon = self.pca.inverse_transform(&forecasts.view());
        let labels = self.forest.predict_rows(&recon.view())?;
        Ok((labels, recon))
    }

    /// AdaBoost baseline on already reconstructed rows.
    pub fn predict_adaboost_rows(&self, recon: &Array2<f64>) -> Result<Vec<FaultLabel>> {
        (0..recon.nrows())
            .map(|i| predict_adaboost(&self.adaboost, &recon.row(i)))
            .collect()
    }

    /// Ground-truth normalized feature rows at the windows' target rows.
    pub fn actual_normalized_targets(&self, idx: &[usize]) -> Array2<f64> {
        let rows: Vec<usize> = idx.iter().map(|&i| self.windows.target_row(i)).collect();
        gather_rows(&self.normalized, &rows)
    }
}

/// The persisted artifacts of a trained pipeline.
pub struct ModelBundle {
    pub normalizer: Normalizer,
    pub pca: PcaModel,
    pub lstm: Lstm,
    pub forest: ForestModel,
}

pub const NORMALIZER_FILE: &str = "normalizer.csv";
pub const PCA_FILE: &str = "pca.csv";
pub const LSTM_FILE: &str = "lstm.txt";
pub const FOREST_FILE: &str = "forest.txt";

impl ModelBundle {
    pub fn from_fold(fold: &FoldModel) -> Self {
        ModelBundle {
            normalizer: fold.normalizer.clone(),
            pca: fold.pca.clone(),
            lstm: fold.lstm.clone(),
            forest: fold.forest.clone(),
        }
    }

    pub fn save(&self, dir: &Path, schema: &Schema) -> Result<()> {
        write_normalizer(&dir.join(NORMALIZER_FILE), &self.normalizer, schema)?;
        write_pca(&dir.join(PCA_FILE), &self.pca)?;
        write_lstm(&dir.join(LSTM_FILE), &self.lstm)?;
        write_forest(&dir.join(FOREST_FILE), &self.forest)
    }

    pub fn load(dir: &Path, schema: &Schema) -> Result<Self> {
        let check = |name: &str| -> Result<PathBuf> {
            let path = dir.join(name);
            if !path.is_file() {
                return Err(Error::Model {
                    path,
                    msg: "missing model file".into(),
                });
            }
            Ok(path)
        };
        Ok(ModelBundle {
            normalizer: read_normalizer(&check(NORMALIZER_FILE)?, schema)?,
            pca: read_pca(&check(PCA_FILE)?)?,
            lstm: read_lstm(&check(LSTM_FILE)?)?,
            forest: read_forest(&check(FOREST_FILE)?)?,
        })
    }
}

/// One prediction for the row `m` steps past anchor `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub anchor: usize,
    pub target_row: usize,
    pub label: FaultLabel,
    pub probabilities: [f64; FaultLabel::COUNT],
}

/// Classify the window ending at row `t` of the table: the prediction refers
/// to row `t + m`. Follows the exact evaluation path: normalize, reduce,
/// forecast, reconstruct, classify.
pub fn predict_at_tick(
    bundle: &ModelBundle,
    table: &DatasetTable,
    k: usize,
    m: usize,
    t: usize,
) -> Result<Prediction> {
    let rows = table.features.nrows();
    if rows < k + m + 1 {
        return Err(Error::invalid(
            "dataset",
            format!("{rows} rows; need at least {}", k + m + 1),
        ));
    }
    let max_t = rows - 1 - m;
    if t < k || t > max_t {
        return Err(Error::invalid(
            "t",
            format!("anchor {t} outside valid range {k}..={max_t}"),
        ));
    }
    let normalized = bundle.normalizer.apply(&table.features);
    let window = normalized.slice(ndarray::s![t - k..=t, ..]);
    let reduced = bundle.pca.transform(&window);
    let forecast = bundle.lstm.forward(&reduced.view())?;
    let recon = bundle
        .pca
        .inverse_transform(&forecast.view().insert_axis(ndarray::Axis(0)));
    let label = bundle.forest.predict(&recon.row(0))?;
    let probabilities = bundle.forest.predict_proba(&recon.row(0))?;
    Ok(Prediction {
        anchor: t,
        target_row: t + m,
        label,
        probabilities,
    })
}
