//! Alignment of raw frames onto the 1-second grid, gap imputation, min-max
//! normalization, and sliding-window extraction.
//!
//! Gaps are carried as NaN between [`align`] and [`impute`]; every stage
//! after [`impute`] sees dense finite data.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::telemetry::{fmt_f64, FaultLabel, Schema, TelemetryFrame};
use crate::{Error, Result};

/// Fold a time-ordered frame stream into a `duration_s x schema.len()` table.
/// Each cell is the arithmetic mean of the samples that landed in that second
/// (RAN metrics contribute 10 sub-samples per tick, slow metrics one); cells
/// with no samples are NaN.
pub fn align<I>(frames: I, schema: &Schema, duration_s: u64) -> Result<Array2<f64>>
where
    I: IntoIterator<Item = TelemetryFrame>,
{
    let rows = duration_s as usize;
    let d = schema.len();
    let mut out = Array2::from_elem((rows, d), f64::NAN);
    let mut sums = vec![0.0f64; d];
    let mut counts = vec![0u32; d];
    let mut cur_tick: u64 = 0;

    let flush = |tick: u64, sums: &mut [f64], counts: &mut [u32], out: &mut Array2<f64>| {
        let r = tick as usize;
        for j in 0..d {
            if counts[j] > 0 {
                out[[r, j]] = sums[j] / counts[j] as f64;
            }
            sums[j] = 0.0;
            counts[j] = 0;
        }
    };

    for frame in frames {
        let tick = frame.timestamp_ms / 1000;
        if tick >= duration_s {
            return Err(Error::invalid(
                "frames",
                format!(
                    "timestamp {} ms is outside the {} s capture window",
                    frame.timestamp_ms, duration_s
                ),
            ));
        }
        if tick < cur_tick {
            return Err(Error::invalid(
                "frames",
                format!("timestamps not sorted: tick {tick} after {cur_tick}"),
            ));
        }
        while cur_tick < tick {
            flush(cur_tick, &mut sums, &mut counts, &mut out);
            cur_tick += 1;
        }
        let id = frame.column_id();
        let j = schema.column_index(&id).ok_or_else(|| {
            Error::invalid("frames", format!("column {id} not in the active schema"))
        })?;
        sums[j] += frame.value;
        counts[j] += 1;
    }
    if cur_tick < duration_s {
        flush(cur_tick, &mut sums, &mut counts, &mut out);
    }
    Ok(out)
}

/// Fill gaps in place: forward fill within each column, backward fill for
/// leading gaps, zero for columns that never reported.
pub fn impute(table: &mut Array2<f64>) {
    for mut col in table.columns_mut() {
        let mut last = f64::NAN;
        for v in col.iter_mut() {
            if v.is_nan() {
                *v = last;
            } else {
                last = *v;
            }
        }
        // Leading gaps: backfill from the first finite value, if any.
        let first = col.iter().copied().find(|v| !v.is_nan()).unwrap_or(0.0);
        for v in col.iter_mut() {
            if v.is_nan() {
                *v = first;
            } else {
                break;
            }
        }
        // A column that never reported is all NaN up to here.
        if last.is_nan() {
            col.fill(0.0);
        }
    }
}

/// Per-column min-max scaler. Fitted on a caller-chosen row subset so a fold
/// can fit on training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl Normalizer {
    /// Fit over `rows` of `table`. Every referenced cell must be finite.
    pub fn fit(table: &Array2<f64>, rows: &[usize]) -> Result<Normalizer> {
        if rows.is_empty() {
            return Err(Error::invalid("rows", "normalizer fit needs at least one row"));
        }
        let d = table.ncols();
        let mut mins = vec![f64::INFINITY; d];
        let mut maxs = vec![f64::NEG_INFINITY; d];
        for &r in rows {
            if r >= table.nrows() {
                return Err(Error::invalid("rows", format!("row {r} out of range")));
            }
            for j in 0..d {
                let v = table[[r, j]];
                if !v.is_finite() {
                    return Err(Error::invalid(
                        "table",
                        format!("non-finite cell at row {r}, column {j}; impute first"),
                    ));
                }
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        Ok(Normalizer { mins, maxs })
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    /// Scale one value of column `j` into `[0, 1]` (for in-range inputs).
    /// Columns that were constant at fit time map to 0.
    pub fn apply_one(&self, j: usize, v: f64) -> f64 {
        let span = self.maxs[j] - self.mins[j];
        if span > 0.0 {
            (v - self.mins[j]) / span
        } else {
            0.0
        }
    }

    pub fn invert_one(&self, j: usize, v: f64) -> f64 {
        let span = self.maxs[j] - self.mins[j];
        if span > 0.0 {
            v * span + self.mins[j]
        } else {
            self.mins[j]
        }
    }

    /// Normalize a whole table (any row count, same column count).
    pub fn apply(&self, table: &Array2<f64>) -> Array2<f64> {
        let mut out = table.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let span = self.maxs[j] - self.mins[j];
            if span > 0.0 {
                let min = self.mins[j];
                col.mapv_inplace(|v| (v - min) / span);
            } else {
                col.fill(0.0);
            }
        }
        out
    }

    /// Map normalized rows back to raw units.
    pub fn invert_rows(&self, rows: &ArrayView2<f64>) -> Array2<f64> {
        let mut out = rows.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let span = self.maxs[j] - self.mins[j];
            let min = self.mins[j];
            if span > 0.0 {
                col.mapv_inplace(|v| v * span + min);
            } else {
                col.fill(min);
            }
        }
        out
    }
}

/// Persist a normalizer as `feature_id,min,max` lines in schema order.
pub fn write_normalizer(path: &Path, norm: &Normalizer, schema: &Schema) -> Result<()> {
    if norm.dim() != schema.len() {
        return Err(Error::invalid(
            "normalizer",
            format!("{} columns vs schema {}", norm.dim(), schema.len()),
        ));
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "feature_id,min,max").map_err(|e| Error::io(path, e))?;
    for (j, c) in schema.columns().iter().enumerate() {
        writeln!(w, "{},{},{}", c.id, fmt_f64(norm.mins[j]), fmt_f64(norm.maxs[j]))
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a normalizer written by [`write_normalizer`]; ids must match the
/// schema in order.
pub fn read_normalizer(path: &Path, schema: &Schema) -> Result<Normalizer> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h == "feature_id,min,max" => {}
        Some((_, Ok(h))) => {
            return Err(Error::HeaderMismatch {
                path: path.into(),
                expected: "feature_id,min,max".into(),
                found: h,
            })
        }
        Some((_, Err(e))) => return Err(Error::io(path, e)),
        None => {
            return Err(Error::Format {
                path: path.into(),
                line: 1,
                msg: "empty file".into(),
            })
        }
    }
    let mut mins = Vec::with_capacity(schema.len());
    let mut maxs = Vec::with_capacity(schema.len());
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fmt_err = |msg: String| Error::Format {
            path: path.into(),
            line: i + 1,
            msg,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(fmt_err(format!("expected 3 fields, found {}", f.len())));
        }
        let j = mins.len();
        let expected = &schema.columns().get(j).map(|c| c.id.as_str());
        if Some(f[0]) != *expected {
            return Err(fmt_err(format!(
                "feature id {:?} does not match schema column {:?}",
                f[0], expected
            )));
        }
        let min: f64 = f[1].parse().map_err(|_| fmt_err(format!("bad min {:?}", f[1])))?;
        let max: f64 = f[2].parse().map_err(|_| fmt_err(format!("bad max {:?}", f[2])))?;
        mins.push(min);
        maxs.push(max);
    }
    if mins.len() != schema.len() {
        return Err(Error::Format {
            path: path.into(),
            line: mins.len() + 1,
            msg: format!("{} entries for {} schema columns", mins.len(), schema.len()),
        });
    }
    Ok(Normalizer { mins, maxs })
}

/// Sliding windows over a feature table. A window anchored at tick `t` spans
/// input rows `t-k ..= t` and is labeled/targeted by row `t+m`. Inputs are
/// views into the shared table, so a window set is cheap regardless of size.
#[derive(Debug, Clone)]
pub struct WindowSet {
    data: Arc<Array2<f64>>,
    pub k: usize,
    pub m: usize,
    /// Anchor ticks, ascending.
    pub anchors: Vec<usize>,
    /// Target label per window (label of row `anchor + m`).
    pub labels: Vec<FaultLabel>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn data(&self) -> &Arc<Array2<f64>> {
        &self.data
    }

    /// Input matrix of window `i`: `(k+1) x d`.
    pub fn input(&self, i: usize) -> ArrayView2<'_, f64> {
        let t = self.anchors[i];
        self.data.slice(ndarray::s![t - self.k..=t, ..])
    }

    /// Row index the window predicts.
    pub fn target_row(&self, i: usize) -> usize {
        self.anchors[i] + self.m
    }

    /// Target vector of window `i`.
    pub fn target(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(self.target_row(i))
    }

    pub fn label(&self, i: usize) -> FaultLabel {
        self.labels[i]
    }

    /// Stack the targets of the given windows into an `n x d` matrix.
    pub fn targets_of(&self, idx: &[usize]) -> Array2<f64> {
        let d = self.data.ncols();
        let mut out = Array2::zeros((idx.len(), d));
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).assign(&self.target(i));
        }
        out
    }

    pub fn labels_of(&self, idx: &[usize]) -> Vec<FaultLabel> {
        idx.iter().map(|&i| self.labels[i]).collect()
    }
}

/// Cut windows with lookback `k`, horizon `m` and the given stride.
/// Needs at least `k + m + 1` rows (one full window plus its target).
pub fn make_windows(
    features: Arc<Array2<f64>>,
    labels: &[FaultLabel],
    k: usize,
    m: usize,
    stride: usize,
) -> Result<WindowSet> {
    let rows = features.nrows();
    if labels.len() != rows {
        return Err(Error::invalid(
            "labels",
            format!("{} labels for {} rows", labels.len(), rows),
        ));
    }
    if k == 0 || m == 0 || stride == 0 {
        return Err(Error::invalid("windows", "k, m and stride must be positive"));
    }
    let min_rows = k + m + 1;
    if rows < min_rows {
        return Err(Error::invalid(
            "windows",
            format!("{rows} rows; need at least {min_rows} (k + m + 1)"),
        ));
    }
    let mut anchors = Vec::new();
    let mut win_labels = Vec::new();
    let mut t = k;
    while t + m < rows {
        anchors.push(t);
        win_labels.push(labels[t + m]);
        t += stride;
    }
    Ok(WindowSet {
        data: features,
        k,
        m,
        anchors,
        labels: win_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::build_default_schema;
    use proptest::prelude::*;
    use std::sync::Arc as StdArc;

    fn frame(ts: u64, node: &str, metric: &str, value: f64) -> TelemetryFrame {
        TelemetryFrame {
            timestamp_ms: ts,
            node_id: StdArc::from(node),
            metric_id: StdArc::from(metric),
            value,
        }
    }

    #[test]
    fn align_averages_subsamples() {
        let schema = build_default_schema(1, 1, 1, 1).unwrap();
        let mut frames = Vec::new();
        // 10 sub-samples 1..=10 for du1.cqi in second 0 -> mean 5.5.
        for k in 0..10u64 {
            frames.push(frame(k * 100, "du1", "cqi", (k + 1) as f64));
        }
        // Constant sub-samples in second 1 -> that constant.
        for k in 0..10u64 {
            frames.push(frame(1000 + k * 100, "du1", "cqi", 7.25));
        }
        let table = align(frames, &schema, 2).unwrap();
        let j = schema.column_index("du1.cqi").unwrap();
        assert!((table[[0, j]] - 5.5).abs() < 1e-12);
        assert!((table[[1, j]] - 7.25).abs() < 1e-12);
        // Untouched column is a gap.
        let j2 = schema.column_index("host.cpu_usage").unwrap();
        assert!(table[[0, j2]].is_nan());
    }

    #[test]
    fn align_places_slow_metrics_directly() {
        let schema = build_default_schema(1, 1, 1, 1).unwrap();
        let frames = vec![frame(0, "host", "cpu_usage", 0.25), frame(2000, "host", "cpu_usage", 0.5)];
        let table = align(frames, &schema, 3).unwrap();
        let j = schema.column_index("host.cpu_usage").unwrap();
        assert_eq!(table[[0, j]], 0.25);
        assert!(table[[1, j]].is_nan()); // missing second stays a gap
        assert_eq!(table[[2, j]], 0.5);
    }

    #[test]
    fn align_rejects_out_of_window_and_unknown() {
        let schema = build_default_schema(1, 1, 1, 1).unwrap();
        let err = align(vec![frame(5000, "du1", "cqi", 1.0)], &schema, 3).unwrap_err();
        assert!(err.to_string().contains("outside"), "{err}");
        let err = align(vec![frame(0, "du9", "cqi", 1.0)], &schema, 3).unwrap_err();
        assert!(err.to_string().contains("du9.cqi"), "{err}");
    }

    #[test]
    fn impute_fills_forward_then_backward_then_zero() {
        let nan = f64::NAN;
        let mut t = ndarray::array![
            [nan, 1.0, nan],
            [2.0, nan, nan],
            [nan, 3.0, nan],
            [4.0, nan, nan],
        ];
        impute(&mut t);
        // Column 0: leading gap backfilled from 2.0, interior forward-filled.
        assert_eq!(t.column(0).to_vec(), vec![2.0, 2.0, 2.0, 4.0]);
        // Column 1: forward fill.
        assert_eq!(t.column(1).to_vec(), vec![1.0, 1.0, 3.0, 3.0]);
        // Column 2: never reported -> zeros.
        assert_eq!(t.column(2).to_vec(), vec![0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn normalizer_maps_constant_columns_to_zero() {
        let t = ndarray::array![[1.0, 5.0], [3.0, 5.0], [2.0, 5.0]];
        let n = Normalizer::fit(&t, &[0, 1, 2]).unwrap();
        let scaled = n.apply(&t);
        assert_eq!(scaled.column(1).to_vec(), vec![0.0, 0.0, 0.0]);
        assert_eq!(scaled.column(0).to_vec(), vec![0.0, 1.0, 0.5]);
        // Inverse maps the constant column back to its fitted value.
        let back = n.invert_rows(&scaled.view());
        assert_eq!(back.column(1).to_vec(), vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn normalizer_fit_ignores_excluded_rows() {
        let mut t = ndarray::array![[0.0], [1.0], [100.0]];
        let n = Normalizer::fit(&t, &[0, 1]).unwrap();
        // Perturbing a row outside the fit subset cannot change the fit.
        t[[2, 0]] = -999.0;
        let n2 = Normalizer::fit(&t, &[0, 1]).unwrap();
        assert_eq!(n, n2);
        assert_eq!(n.apply_one(0, 0.5), 0.5);
    }

    #[test]
    fn normalizer_round_trips_through_file() {
        let schema = build_default_schema(1, 1, 1, 1).unwrap();
        let t = Array2::from_shape_fn((4, schema.len()), |(i, j)| (i * j) as f64 * 0.37 + 1.0);
        let n = Normalizer::fit(&t, &[0, 1, 2, 3]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("norm.csv");
        write_normalizer(&path, &n, &schema).unwrap();
        let back = read_normalizer(&path, &schema).unwrap();
        assert_eq!(back, n);
    }

    #[test]
    fn window_counts_match_formula() {
        let labels = |n: usize| vec![FaultLabel::Normal; n];
        let table = |n: usize| Arc::new(Array2::<f64>::zeros((n, 3)));
        let w = make_windows(table(100), &labels(100), 60, 5, 1).unwrap();
        assert_eq!(w.len(), 35);
        let w = make_windows(table(66), &labels(66), 60, 5, 1).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.anchors, vec![60]);
        let err = make_windows(table(65), &labels(65), 60, 5, 1).unwrap_err();
        assert!(err.to_string().contains("66"), "{err}");
        // Stride 2 halves the count (rounding up).
        let w = make_windows(table(100), &labels(100), 60, 5, 2).unwrap();
        assert_eq!(w.len(), 18);
    }

    #[test]
    fn window_views_have_window_shape() {
        let rows = 80;
        let d = 4;
        let data = Arc::new(Array2::from_shape_fn((rows, d), |(i, j)| (i * 10 + j) as f64));
        let mut labels = vec![FaultLabel::Normal; rows];
        labels[70] = FaultLabel::PacketLoss;
        let w = make_windows(data.clone(), &labels, 60, 5, 1).unwrap();
        let first = w.input(0);
        assert_eq!(first.dim(), (61, d));
        assert_eq!(first[[0, 0]], 0.0);
        assert_eq!(first[[60, 0]], 600.0);
        // Window anchored at 65 targets row 70 and carries its label.
        let i = w.anchors.iter().position(|&t| t == 65).unwrap();
        assert_eq!(w.target_row(i), 70);
        assert_eq!(w.label(i), FaultLabel::PacketLoss);
        assert_eq!(w.target(i)[0], 700.0);
    }

    proptest! {
        #[test]
        fn apply_then_invert_is_identity(rows in 2usize..20, cols in 1usize..6, seed in 0u64..500) {
            let mut rng = crate::rng::RngStream::derive(seed, "prop-norm", 0);
            let t = Array2::from_shape_fn((rows, cols), |_| rng.uniform(-1000.0, 1000.0));
            let all: Vec<usize> = (0..rows).collect();
            let n = Normalizer::fit(&t, &all).unwrap();
            let back = n.invert_rows(&n.apply(&t).view());
            for (a, b) in t.iter().zip(back.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
            }
        }

        #[test]
        fn window_labels_always_match_target_row(rows in 66usize..200, seed in 0u64..500) {
            let mut rng = crate::rng::RngStream::derive(seed, "prop-win", 0);
            let labels: Vec<FaultLabel> = (0..rows)
                .map(|_| FaultLabel::from_code(rng.below(4) as u8).unwrap())
                .collect();
            let data = Arc::new(Array2::<f64>::zeros((rows, 2)));
            let w = make_windows(data, &labels, 60, 5, 1).unwrap();
            prop_assert_eq!(w.len(), rows - 65);
            for i in 0..w.len() {
                prop_assert_eq!(w.label(i), labels[w.target_row(i)]);
                prop_assert_eq!(w.target_row(i), w.anchors[i] + 5);
            }
        }
    }
}
