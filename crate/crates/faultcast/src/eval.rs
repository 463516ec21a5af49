//! Evaluation protocol: stratified k-fold cross-validation, confusion
//! matrices, precision/recall/F1 summaries, and forecast RMSE.
//!
//! Metrics are computed per fold and then averaged arithmetically, so the
//! averaged confusion matrix carries fractional counts. Degenerate cases
//! (a class never predicted, or absent from a fold) score 0 and are flagged
//! rather than silently dropped.

use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::ArrayView2;

use crate::pipeline::{fit_fold, PipelineConfig};
use crate::preprocess::make_windows;
use crate::rng::RngStream;
use crate::telemetry::{fmt_f64, DatasetTable, FaultLabel};
use crate::{Error, Result};

const K: usize = FaultLabel::COUNT;

/// How cross-validation folds are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Seeded shuffle within each class, then a round-robin deal; per-class
    /// fold counts differ by at most one. The default.
    Stratified,
    /// Contiguous index blocks in time order; no class balance guarantee.
    TimeBlocked,
}

/// Stratified fold assignment over window labels. Every class must have at
/// least `k` samples.
pub fn stratified_kfold(
    labels: &[FaultLabel],
    k: usize,
    rng: &mut RngStream,
) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid("k", format!("{k} folds; need at least 2")));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); K];
    for (i, l) in labels.iter().enumerate() {
        per_class[l.code() as usize].push(i);
    }
    for (c, members) in per_class.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            return Err(Error::TooFewSamples {
                class: c as u8,
                count: members.len(),
                folds: k,
            });
        }
    }
    if per_class.iter().all(|m| m.is_empty()) {
        return Err(Error::invalid("labels", "no samples"));
    }

    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for members in per_class.iter_mut() {
        rng.shuffle(members);
        for (j, &idx) in members.iter().enumerate() {
            folds[j % k].push(idx);
        }
    }
    for fold in folds.iter_mut() {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Contiguous time-ordered blocks; sizes differ by at most one.
pub fn time_blocked_kfold(n: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid("k", format!("{k} folds; need at least 2")));
    }
    if n < k {
        return Err(Error::invalid(
            "n",
            format!("{n} samples cannot fill {k} folds"),
        ));
    }
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push((start..start + size).collect());
        start += size;
    }
    Ok(folds)
}

/// Rows are true classes, columns are predicted classes. Entries are f64 so
/// fold-averaged matrices (fractional counts) use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub counts: [[f64; K]; K],
}

impl ConfusionMatrix {
    pub fn zeros() -> Self {
        ConfusionMatrix {
            counts: [[0.0; K]; K],
        }
    }

    pub fn from_pairs(truth: &[FaultLabel], predicted: &[FaultLabel]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::invalid(
                "predicted",
                format!("{} predictions for {} labels", predicted.len(), truth.len()),
            ));
        }
        let mut cm = Self::zeros();
        for (t, p) in truth.iter().zip(predicted) {
            cm.counts[t.code() as usize][p.code() as usize] += 1.0;
        }
        Ok(cm)
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> f64 {
        (0..K).map(|c| self.counts[c][c]).sum()
    }

    pub fn row_sum(&self, c: usize) -> f64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> f64 {
        (0..K).map(|r| self.counts[r][c]).sum()
    }

    /// Arithmetic mean of several matrices.
    pub fn mean_of(matrices: &[ConfusionMatrix]) -> ConfusionMatrix {
        let mut out = Self::zeros();
        for m in matrices {
            for r in 0..K {
                for c in 0..K {
                    out.counts[r][c] += m.counts[r][c];
                }
            }
        }
        let n = matrices.len() as f64;
        for r in 0..K {
            for c in 0..K {
                out.counts[r][c] /= n;
            }
        }
        out
    }
}

/// One class's scores. `precision_defined` / `recall_defined` are false when
/// the denominator was empty (score forced to 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: f64,
    pub precision_defined: bool,
    pub recall_defined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub per_class: [ClassMetrics; K],
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
}

/// Standard derivation of all summary metrics from one confusion matrix.
pub fn metrics_from_confusion(cm: &ConfusionMatrix) -> Result<MetricsSummary> {
    let total = cm.total();
    if total <= 0.0 {
        return Err(Error::invalid("confusion", "empty matrix"));
    }
    let mut per_class = [ClassMetrics {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        support: 0.0,
        precision_defined: true,
        recall_defined: true,
    }; K];
    for c in 0..K {
        let tp = cm.counts[c][c];
        let col = cm.col_sum(c);
        let row = cm.row_sum(c);
        let (precision, precision_defined) = if col > 0.0 { (tp / col, true) } else { (0.0, false) };
        let (recall, recall_defined) = if row > 0.0 { (tp / row, true) } else { (0.0, false) };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class[c] = ClassMetrics {
            precision,
            recall,
            f1,
            support: row,
            precision_defined,
            recall_defined,
        };
    }
    let kf = K as f64;
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|m| f(m) * m.support)
            .sum::<f64>()
            / total
    };
    Ok(MetricsSummary {
        per_class,
        accuracy: cm.trace() / total,
        macro_precision: per_class.iter().map(|m| m.precision).sum::<f64>() / kf,
        macro_recall: per_class.iter().map(|m| m.recall).sum::<f64>() / kf,
        macro_f1: per_class.iter().map(|m| m.f1).sum::<f64>() / kf,
        weighted_precision: weighted(|m| m.precision),
        weighted_recall: weighted(|m| m.recall),
        weighted_f1: weighted(|m| m.f1),
    })
}

/// Arithmetic mean of fold summaries, field by field. Defined-flags are the
/// conjunction across folds.
pub fn average_metrics(folds: &[MetricsSummary]) -> MetricsSummary {
    let n = folds.len() as f64;
    let mean = |f: &dyn Fn(&MetricsSummary) -> f64| folds.iter().map(|s| f(s)).sum::<f64>() / n;
    let mut per_class = [ClassMetrics {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        support: 0.0,
        precision_defined: true,
        recall_defined: true,
    }; K];
    for (c, out) in per_class.iter_mut().enumerate() {
        for s in folds {
            let m = &s.per_class[c];
            out.precision += m.precision / n;
            out.recall += m.recall / n;
            out.f1 += m.f1 / n;
            out.support += m.support / n;
            out.precision_defined &= m.precision_defined;
            out.recall_defined &= m.recall_defined;
        }
    }
    MetricsSummary {
        per_class,
        accuracy: mean(&|s| s.accuracy),
        macro_precision: mean(&|s| s.macro_precision),
        macro_recall: mean(&|s| s.macro_recall),
        macro_f1: mean(&|s| s.macro_f1),
        weighted_precision: mean(&|s| s.weighted_precision),
        weighted_recall: mean(&|s| s.weighted_recall),
        weighted_f1: mean(&|s| s.weighted_f1),
    }
}

/// Root mean squared error over all entries of two equally shaped matrices.
pub fn forecast_rmse(predicted: &ArrayView2<f64>, actual: &ArrayView2<f64>) -> Result<f64> {
    if predicted.dim() != actual.dim() {
        return Err(Error::invalid(
            "actual",
            format!("shape {:?} vs {:?}", actual.dim(), predicted.dim()),
        ));
    }
    let n = predicted.len();
    if n == 0 {
        return Err(Error::invalid("predicted", "empty matrices"));
    }
    let sum_sq: f64 = predicted
        .iter()
        .zip(actual.iter())
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok(libm::sqrt(sum_sq / n as f64))
}

/// Everything measured on one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsSummary,
    pub forecast_rmse: f64,
    /// Accuracy of the AdaBoost baseline on the same test windows.
    pub adaboost_accuracy: f64,
    /// Mean LSTM training loss per epoch.
    pub lstm_loss: Vec<f64>,
    /// Forest out-of-bag accuracy, when bootstrapping produced any.
    pub oob_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub folds: Vec<FoldOutcome>,
    pub averaged_confusion: ConfusionMatrix,
    pub averaged: MetricsSummary,
    pub averaged_rmse: f64,
    pub averaged_adaboost_accuracy: f64,
}

/// The full protocol: split windows into folds, fit the whole pipeline on
/// each training side, score the held-out windows, then average.
pub fn run_cross_validation(
    table: &DatasetTable,
    cfg: &PipelineConfig,
    k_folds: usize,
    mode: SplitMode,
    seed: u64,
) -> Result<EvaluationReport> {
    let raw_windows = make_windows(
        std::sync::Arc::new(table.features.clone()),
        &table.labels,
        cfg.k,
        cfg.m,
        cfg.stride,
    )?;
    let folds = match mode {
        SplitMode::Stratified => {
            let mut rng = RngStream::derive(seed, "folds", 0);
            stratified_kfold(&raw_windows.labels, k_folds, &mut rng)?
        }
        SplitMode::TimeBlocked => time_blocked_kfold(raw_windows.len(), k_folds)?,
    };

    let mut outcomes = Vec::with_capacity(k_folds);
    for f in 0..folds.len() {
        let outcome = run_fold(table, cfg, &folds, f, seed)
            .map_err(|e| Error::Training(format!("fold {f}: {e}")))?;
        outcomes.push(outcome);
    }

    let averaged_confusion =
        ConfusionMatrix::mean_of(&outcomes.iter().map(|o| o.confusion.clone()).collect::<Vec<_>>());
    let averaged = average_metrics(&outcomes.iter().map(|o| o.metrics.clone()).collect::<Vec<_>>());
    let averaged_rmse =
        outcomes.iter().map(|o| o.forecast_rmse).sum::<f64>() / outcomes.len() as f64;
    let averaged_adaboost_accuracy =
        outcomes.iter().map(|o| o.adaboost_accuracy).sum::<f64>() / outcomes.len() as f64;

    Ok(EvaluationReport {
        folds: outcomes,
        averaged_confusion,
        averaged,
        averaged_rmse,
        averaged_adaboost_accuracy,
    })
}

fn run_fold(
    table: &DatasetTable,
    cfg: &PipelineConfig,
    folds: &[Vec<usize>],
    f: usize,
    seed: u64,
) -> Result<FoldOutcome> {
    let mut train_idx: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(g, _)| *g != f)
        .flat_map(|(_, fold)| fold.iter().copied())
        .collect();
    train_idx.sort_unstable();
    let test_idx = &folds[f];

    let fitted = fit_fold(table, &train_idx, cfg, seed, f as u64)?;
    let (predicted, reconstructions) = fitted.predict_windows(test_idx)?;
    let truth = fitted.windows().labels_of(test_idx);

    let confusion = ConfusionMatrix::from_pairs(&truth, &predicted)?;
    let metrics = metrics_from_confusion(&confusion)?;
    let actual = fitted.actual_normalized_targets(test_idx);
    let rmse = forecast_rmse(&reconstructions.view(), &actual.view())?;

    let ada_predicted = fitted.predict_adaboost_rows(&reconstructions)?;
    let ada_correct = truth
        .iter()
        .zip(&ada_predicted)
        .filter(|(t, p)| t == p)
        .count();

    Ok(FoldOutcome {
        confusion,
        metrics,
        forecast_rmse: rmse,
        adaboost_accuracy: ada_correct as f64 / truth.len() as f64,
        lstm_loss: fitted.lstm_loss.clone(),
        oob_accuracy: fitted.oob_accuracy,
    })
}

/// Machine-readable report: one row per fold plus a `mean` row.
pub fn write_report_csv(path: &Path, report: &EvaluationReport) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = String::from(
        "fold,accuracy,macro_precision,macro_recall,macro_f1,\
         weighted_precision,weighted_recall,weighted_f1,forecast_rmse,\
         adaboost_accuracy,lstm_first_mse,lstm_final_mse",
    );
    for r in 0..K {
        for c in 0..K {
            header.push_str(&format!(",cm_{r}_{c}"));
        }
    }
    writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;

    let mut row = |tag: &str,
                   m: &MetricsSummary,
                   cm: &ConfusionMatrix,
                   rmse: f64,
                   ada: f64,
                   first_mse: f64,
                   final_mse: f64|
     -> Result<()> {
        let mut line = format!(
            "{tag},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(m.accuracy),
            fmt_f64(m.macro_precision),
            fmt_f64(m.macro_recall),
            fmt_f64(m.macro_f1),
            fmt_f64(m.weighted_precision),
            fmt_f64(m.weighted_recall),
            fmt_f64(m.weighted_f1),
            fmt_f64(rmse),
            fmt_f64(ada),
            fmt_f64(first_mse),
            fmt_f64(final_mse),
        );
        for r in 0..K {
            for c in 0..K {
                line.push(',');
                line.push_str(&fmt_f64(cm.counts[r][c]));
            }
        }
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))
    };

    for (f, fold) in report.folds.iter().enumerate() {
        let first = fold.lstm_loss.first().copied().unwrap_or(f64::NAN);
        let last = fold.lstm_loss.last().copied().unwrap_or(f64::NAN);
        row(
            &f.to_string(),
            &fold.metrics,
            &fold.confusion,
            fold.forecast_rmse,
            fold.adaboost_accuracy,
            first,
            last,
        )?;
    }
    let n = report.folds.len() as f64;
    let first_mean = report
        .folds
        .iter()
        .map(|f| f.lstm_loss.first().copied().unwrap_or(f64::NAN))
        .sum::<f64>()
        / n;
    let final_mean = report
        .folds
        .iter()
        .map(|f| f.lstm_loss.last().copied().unwrap_or(f64::NAN))
        .sum::<f64>()
        / n;
    row(
        "mean",
        &report.averaged,
        &report.averaged_confusion,
        report.averaged_rmse,
        report.averaged_adaboost_accuracy,
        first_mean,
        final_mean,
    )
}

/// Human-readable report: averaged summary, per-class table, confusion matrix.
pub fn write_report_text(path: &Path, report: &EvaluationReport) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let out = render_report_text(report);
    w.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn render_report_text(report: &EvaluationReport) -> String {
    let a = &report.averaged;
    let pct = |v: f64| format!("{:.2}%", v * 100.0);
    let mut s = String::new();
    s.push_str("Averaged performance across all folds\n");
    s.push_str(&format!("{:<28} {}\n", "Metric", "Value"));
    for (label, value) in [
        ("Accuracy", a.accuracy),
        ("F1-Score", a.weighted_f1),
        ("Macro Average Precision", a.macro_precision),
        ("Macro Average Recall", a.macro_recall),
        ("Macro Average F1-Score", a.macro_f1),
        ("Weighted Average Precision", a.weighted_precision),
        ("Weighted Average Recall", a.weighted_recall),
        ("Weighted Average F1-Score", a.weighted_f1),
    ] {
        s.push_str(&format!("{label:<28} {}\n", pct(value)));
    }
    s.push_str(&format!(
        "{:<28} {:.5}\n",
        "Forecast RMSE (normalized)", report.averaged_rmse
    ));
    s.push_str(&format!(
        "{:<28} {}\n",
        "AdaBoost Accuracy", pct(report.averaged_adaboost_accuracy)
    ));

    s.push_str("\nAverage classification report\n");
    s.push_str(&format!(
        "{:<14} {:>10} {:>10} {:>10} {:>10}\n",
        "Class", "Precision", "Recall", "F1-Score", "Support"
    ));
    for label in FaultLabel::ALL {
        let m = &a.per_class[label.code() as usize];
        let mark = if m.precision_defined && m.recall_defined {
            ""
        } else {
            " *"
        };
        s.push_str(&format!(
            "{:<14} {:>10} {:>10} {:>10} {:>10.1}{}\n",
            label.display_name(),
            pct(m.precision),
            pct(m.recall),
            pct(m.f1),
            m.support,
            mark,
        ));
    }
    if a
        .per_class
        .iter()
        .any(|m| !m.precision_defined || !m.recall_defined)
    {
        s.push_str("* undefined on at least one fold (empty denominator), scored 0\n");
    }

    s.push_str("\nAverage confusion matrix (rows = true class)\n");
    s.push_str(&format!("{:<14}", ""));
    for label in FaultLabel::ALL {
        s.push_str(&format!(" {:>13}", label.display_name()));
    }
    s.push('\n');
    for (r, label) in FaultLabel::ALL.iter().enumerate() {
        s.push_str(&format!("{:<14}", label.display_name()));
        for c in 0..K {
            s.push_str(&format!(" {:>13.1}", report.averaged_confusion.counts[r][c]));
        }
        s.push('\n');
    }
    s
}
