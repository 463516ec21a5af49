//! Telemetry vocabulary: metric schema, raw frames, labeled dataset table,
//! and the CSV formats they persist to.
//!
//! A schema is an ordered list of columns. Column ids are node-qualified
//! (`du1.cqi`, `cu2.mem_usage`, `host.temperature_c`) and the column order is
//! the canonical feature order used by every matrix in the pipeline: all RAN
//! metrics DU by DU, then platform metrics container by container (DUs before
//! CUs), then host metrics.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;

use crate::{Error, Result};

/// Render a float so that parsing the text recovers the exact same bits.
/// 17 significant digits round-trip every finite f64.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TelemetryLevel {
    Ran,
    Platform,
    Infra,
}

impl TelemetryLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            TelemetryLevel::Ran => "ran",
            TelemetryLevel::Platform => "platform",
            TelemetryLevel::Infra => "infra",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "ran" => Some(TelemetryLevel::Ran),
            "platform" => Some(TelemetryLevel::Platform),
            "infra" => Some(TelemetryLevel::Infra),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Du,
    Cu,
    Host,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Du => "du",
            NodeKind::Cu => "cu",
            NodeKind::Host => "host",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "du" => Some(NodeKind::Du),
            "cu" => Some(NodeKind::Cu),
            "host" => Some(NodeKind::Host),
            _ => None,
        }
    }
}

/// Fault class labels. The integer codes are part of the dataset format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaultLabel {
    Normal = 0,
    CpuStress = 1,
    MemoryStress = 2,
    PacketLoss = 3,
}

impl FaultLabel {
    pub const COUNT: usize = 4;
    pub const ALL: [FaultLabel; 4] = [
        FaultLabel::Normal,
        FaultLabel::CpuStress,
        FaultLabel::MemoryStress,
        FaultLabel::PacketLoss,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FaultLabel::Normal),
            1 => Some(FaultLabel::CpuStress),
            2 => Some(FaultLabel::MemoryStress),
            3 => Some(FaultLabel::PacketLoss),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultLabel::Normal => "normal",
            FaultLabel::CpuStress => "cpu_stress",
            FaultLabel::MemoryStress => "memory_stress",
            FaultLabel::PacketLoss => "packet_loss",
        }
    }

    /// Human-readable name for report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            FaultLabel::Normal => "Normal",
            FaultLabel::CpuStress => "CPU Stress",
            FaultLabel::MemoryStress => "Memory Stress",
            FaultLabel::PacketLoss => "Packet Loss",
        }
    }
}

impl fmt::Display for FaultLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One telemetry column: a metric emitted by one node.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricDescriptor {
    /// Node-qualified id, unique within a schema (`du1.cqi`).
    pub id: String,
    pub level: TelemetryLevel,
    pub node_kind: NodeKind,
    pub unit: String,
    /// Emission cadence. RAN metrics tick at 100 ms, the rest at 1000 ms.
    pub cadence_ms: u32,
}

impl MetricDescriptor {
    /// Node part of the id (`du1.cqi` -> `du1`).
    pub fn node_id(&self) -> &str {
        self.id.split('.').next().unwrap_or(&self.id)
    }

    /// Metric part of the id (`du1.cqi` -> `cqi`).
    pub fn metric_name(&self) -> &str {
        self.id.split_once('.').map_or(&self.id[..], |(_, m)| m)
    }
}

/// Ordered column list plus an id index. The order is load-bearing: every
/// dataset row, normalizer entry and principal component follows it.
#[derive(Debug, Clone)]
pub struct Schema {
    columns: Vec<MetricDescriptor>,
    index: HashMap<String, usize>,
    pub n_du: usize,
    pub n_cu: usize,
}

impl Schema {
    pub fn new(columns: Vec<MetricDescriptor>, n_du: usize, n_cu: usize) -> Result<Self> {
        let mut index = HashMap::with_capacity(columns.len());
        for (i, c) in columns.iter().enumerate() {
            if index.insert(c.id.clone(), i).is_some() {
                return Err(Error::invalid("schema", format!("duplicate column id {}", c.id)));
            }
        }
        Ok(Schema { columns, index, n_du, n_cu })
    }

    pub fn columns(&self) -> &[MetricDescriptor] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Ids of all DU nodes, in order.
    pub fn du_ids(&self) -> Vec<String> {
        (1..=self.n_du).map(|i| format!("du{i}")).collect()
    }

    /// Ids of all containers (DUs then CUs), in order.
    pub fn container_ids(&self) -> Vec<String> {
        let mut ids = self.du_ids();
        ids.extend((1..=self.n_cu).map(|i| format!("cu{i}")));
        ids
    }
}

/// RAN metrics collected per DU, in column order.
pub const RAN_METRICS: [(&str, &str); 9] = [
    ("active_ues", "count"),
    ("dl_brate_cur_total", "bps"),
    ("dl_brate_max_total", "bps"),
    ("dl_brate", "bps"),
    ("ul_brate", "bps"),
    ("ul_mcs", "index"),
    ("dl_mcs", "index"),
    ("ul_sinr", "db"),
    ("cqi", "index"),
];

/// Platform metrics with modeled behavior, emitted per container. When the
/// configured per-container count exceeds this list the remainder are filler
/// gauges (`aux_NN`) that carry baseline noise only.
pub const PLATFORM_METRICS: [(&str, &str); 9] = [
    ("cpu_usage", "frac"),
    ("mem_usage", "frac"),
    ("cpu_throttled", "frac"),
    ("net_rx_bytes", "bytes_per_s"),
    ("net_tx_bytes", "bytes_per_s"),
    ("net_retrans", "per_s"),
    ("fs_usage", "frac"),
    ("disk_read_bytes", "bytes_per_s"),
    ("disk_write_bytes", "bytes_per_s"),
];

/// Host metrics with modeled behavior; same filler rule as platform metrics.
pub const INFRA_METRICS: [(&str, &str); 10] = [
    ("cpu_usage", "frac"),
    ("mem_usage", "frac"),
    ("temperature_c", "celsius"),
    ("power_w", "watts"),
    ("net_rx_bytes", "bytes_per_s"),
    ("net_tx_bytes", "bytes_per_s"),
    ("disk_read_bytes", "bytes_per_s"),
    ("disk_write_bytes", "bytes_per_s"),
    ("load1", "runq"),
    ("fs_usage", "frac"),
];

pub const RAN_CADENCE_MS: u32 = 100;
pub const SLOW_CADENCE_MS: u32 = 1000;

fn named_or_aux(base: &[(&str, &str)], i: usize) -> (String, String) {
    if i < base.len() {
        (base[i].0.to_string(), base[i].1.to_string())
    } else {
        (format!("aux_{:02}", i - base.len()), "unitless".to_string())
    }
}

/// Build the canonical schema for a deployment of `n_du` DUs, `n_cu` CUs and
/// one host. Column count is
/// `9 * n_du + (n_du + n_cu) * platform_metrics_per_container + infra_metrics`.
pub fn build_default_schema(
    n_du: usize,
    n_cu: usize,
    platform_metrics_per_container: usize,
    infra_metrics: usize,
) -> Result<Schema> {
    if n_du == 0 {
        return Err(Error::invalid("n_du", "at least one DU is required"));
    }
    if platform_metrics_per_container == 0 || infra_metrics == 0 {
        return Err(Error::invalid(
            "schema",
            "platform and infra metric counts must be positive",
        ));
    }

    let mut columns = Vec::new();
    for du in 1..=n_du {
        for (name, unit) in RAN_METRICS {
            columns.push(MetricDescriptor {
                id: format!("du{du}.{name}"),
                level: TelemetryLevel::Ran,
                node_kind: NodeKind::Du,
                unit: unit.to_string(),
                cadence_ms: RAN_CADENCE_MS,
            });
        }
    }
    let mut containers: Vec<(String, NodeKind)> =
        (1..=n_du).map(|i| (format!("du{i}"), NodeKind::Du)).collect();
    containers.extend((1..=n_cu).map(|i| (format!("cu{i}"), NodeKind::Cu)));
    for (node, kind) in &containers {
        for i in 0..platform_metrics_per_container {
            let (name, unit) = named_or_aux(&PLATFORM_METRICS, i);
            columns.push(MetricDescriptor {
                id: format!("{node}.{name}"),
                level: TelemetryLevel::Platform,
                node_kind: *kind,
                unit,
                cadence_ms: SLOW_CADENCE_MS,
            });
        }
    }
    for i in 0..infra_metrics {
        let (name, unit) = named_or_aux(&INFRA_METRICS, i);
        columns.push(MetricDescriptor {
            id: format!("host.{name}"),
            level: TelemetryLevel::Infra,
            node_kind: NodeKind::Host,
            unit,
            cadence_ms: SLOW_CADENCE_MS,
        });
    }
    Schema::new(columns, n_du, n_cu)
}

/// One raw telemetry sample. Node and metric ids are shared `Arc`s because a
/// simulation emits millions of frames.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryFrame {
    pub timestamp_ms: u64,
    pub node_id: Arc<str>,
    pub metric_id: Arc<str>,
    pub value: f64,
}

impl TelemetryFrame {
    /// Node-qualified column id for schema lookup.
    pub fn column_id(&self) -> String {
        format!("{}.{}", self.node_id, self.metric_id)
    }
}

/// Aligned, labeled dataset: one row per second, one column per schema entry.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable {
    pub features: Array2<f64>,
    pub labels: Vec<FaultLabel>,
}

impl DatasetTable {
    pub fn new(features: Array2<f64>, labels: Vec<FaultLabel>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::invalid(
                "labels",
                format!("{} labels for {} rows", labels.len(), features.nrows()),
            ));
        }
        Ok(DatasetTable { features, labels })
    }

    pub fn rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn cols(&self) -> usize {
        self.features.ncols()
    }

    /// Per-class row counts, indexed by label code.
    pub fn label_histogram(&self) -> [usize; FaultLabel::COUNT] {
        let mut h = [0usize; FaultLabel::COUNT];
        for l in &self.labels {
            h[l.code() as usize] += 1;
        }
        h
    }
}

fn expected_header(schema: &Schema) -> String {
    let mut h = String::from("tick_s");
    for c in schema.columns() {
        h.push(',');
        h.push_str(&c.id);
    }
    h.push_str(",label");
    h
}

/// Write a dataset as CSV: `tick_s,<feature ids...>,label`, one row per
/// second, floats rendered to full precision so a read-back is bit-exact.
pub fn write_dataset_csv(path: &Path, table: &DatasetTable, schema: &Schema) -> Result<()> {
    if table.cols() != schema.len() {
        return Err(Error::invalid(
            "table",
            format!("{} columns vs schema {}", table.cols(), schema.len()),
        ));
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut line = expected_header(schema);
    line.push('\n');
    w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    for (t, row) in table.features.rows().into_iter().enumerate() {
        line.clear();
        line.push_str(&t.to_string());
        for v in row {
            line.push(',');
            line.push_str(&fmt_f64(*v));
        }
        line.push(',');
        line.push_str(&table.labels[t].code().to_string());
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a dataset CSV previously written for `schema`. The header must match
/// the schema column-for-column; cells must parse as finite floats; labels
/// must be known class codes; ticks must count up from zero.
pub fn read_dataset_csv(path: &Path, schema: &Schema) -> Result<DatasetTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();

    let header = match lines.next() {
        Some(h) => h.map_err(|e| Error::io(path, e))?,
        None => {
            return Err(Error::Format {
                path: path.into(),
                line: 1,
                msg: "empty file".into(),
            })
        }
    };
    let expected = expected_header(schema);
    if header != expected {
        return Err(Error::HeaderMismatch {
            path: path.into(),
            expected,
            found: header,
        });
    }

    let d = schema.len();
    let mut values: Vec<f64> = Vec::new();
    let mut labels: Vec<FaultLabel> = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let cell_err = |col: String, msg: String| Error::Cell {
            path: path.into(),
            row: row + 1,
            col,
            msg,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 2 {
            return Err(cell_err(
                "<row>".into(),
                format!("expected {} fields, found {}", d + 2, fields.len()),
            ));
        }
        let tick: usize = fields[0]
            .parse()
            .map_err(|_| cell_err("tick_s".into(), format!("not an integer: {:?}", fields[0])))?;
        if tick != row {
            return Err(cell_err(
                "tick_s".into(),
                format!("expected tick {row}, found {tick}"),
            ));
        }
        for (j, raw) in fields[1..=d].iter().enumerate() {
            let col = || schema.columns()[j].id.clone();
            let v: f64 = raw
                .parse()
                .map_err(|_| cell_err(col(), format!("not a number: {raw:?}")))?;
            if !v.is_finite() {
                return Err(cell_err(col(), format!("non-finite value: {raw:?}")));
            }
            values.push(v);
        }
        let code: u8 = fields[d + 1]
            .parse()
            .map_err(|_| cell_err("label".into(), format!("not an integer: {:?}", fields[d + 1])))?;
        let label = FaultLabel::from_code(code)
            .ok_or_else(|| cell_err("label".into(), format!("unknown class code {code}")))?;
        labels.push(label);
    }

    let rows = labels.len();
    let features = Array2::from_shape_vec((rows, d), values)
        .expect("row-major buffer matches (rows, d)");
    DatasetTable::new(features, labels)
}

/// Write the schema file: `<id>,<level>,<node_kind>,<unit>,<cadence_ms>` per
/// column, in feature order.
pub fn write_schema(path: &Path, schema: &Schema) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# n_du={},n_cu={}", schema.n_du, schema.n_cu).map_err(|e| Error::io(path, e))?;
    for c in schema.columns() {
        writeln!(
            w,
            "{},{},{},{},{}",
            c.id,
            c.level.as_str(),
            c.node_kind.as_str(),
            c.unit,
            c.cadence_ms
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a schema file written by [`write_schema`].
pub fn read_schema(path: &Path) -> Result<Schema> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut columns = Vec::new();
    let (mut n_du, mut n_cu) = (0usize, 0usize);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fmt_err = |msg: String| Error::Format {
            path: path.into(),
            line: i + 1,
            msg,
        };
        if let Some(rest) = line.strip_prefix("# ") {
            for part in rest.split(',') {
                if let Some(v) = part.strip_prefix("n_du=") {
                    n_du = v.parse().map_err(|_| fmt_err(format!("bad n_du: {v:?}")))?;
                } else if let Some(v) = part.strip_prefix("n_cu=") {
                    n_cu = v.parse().map_err(|_| fmt_err(format!("bad n_cu: {v:?}")))?;
                }
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(fmt_err(format!("expected 5 fields, found {}", f.len())));
        }
        let level = TelemetryLevel::parse(f[1])
            .ok_or_else(|| fmt_err(format!("unknown level {:?}", f[1])))?;
        let node_kind =
            NodeKind::parse(f[2]).ok_or_else(|| fmt_err(format!("unknown node kind {:?}", f[2])))?;
        let cadence_ms: u32 = f[4]
            .parse()
            .map_err(|_| fmt_err(format!("bad cadence {:?}", f[4])))?;
        columns.push(MetricDescriptor {
            id: f[0].to_string(),
            level,
            node_kind,
            unit: f[3].to_string(),
            cadence_ms,
        });
    }
    Schema::new(columns, n_du, n_cu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn default_schema_column_count() {
        let s = build_default_schema(4, 4, 24, 40).unwrap();
        assert_eq!(s.len(), 9 * 4 + 8 * 24 + 40);
        assert_eq!(s.len(), 268);
    }

    #[test]
    fn large_deployment_schema_column_count() {
        let s = build_default_schema(4, 4, 41, 39).unwrap();
        assert_eq!(s.len(), 403);
    }

    #[test]
    fn minimal_schema_column_count() {
        let s = build_default_schema(1, 1, 1, 1).unwrap();
        assert_eq!(s.len(), 12);
    }

    #[test]
    fn schema_ids_unique_and_ordered_by_level() {
        let s = build_default_schema(2, 2, 10, 6).unwrap();
        let cols = s.columns();
        let mut seen = std::collections::HashSet::new();
        for c in cols {
            assert!(seen.insert(c.id.clone()), "duplicate {}", c.id);
        }
        // RAN block first, then platform, then infra.
        let levels: Vec<_> = cols.iter().map(|c| c.level).collect();
        let first_platform = levels.iter().position(|&l| l == TelemetryLevel::Platform).unwrap();
        let first_infra = levels.iter().position(|&l| l == TelemetryLevel::Infra).unwrap();
        assert!(levels[..first_platform].iter().all(|&l| l == TelemetryLevel::Ran));
        assert!(levels[first_platform..first_infra]
            .iter()
            .all(|&l| l == TelemetryLevel::Platform));
        assert!(levels[first_infra..].iter().all(|&l| l == TelemetryLevel::Infra));
    }

    #[test]
    fn label_codes_round_trip_and_reject_unknown() {
        for l in FaultLabel::ALL {
            assert_eq!(FaultLabel::from_code(l.code()), Some(l));
        }
        assert_eq!(FaultLabel::from_code(4), None);
    }

    fn tiny_table() -> (Schema, DatasetTable) {
        let schema = build_default_schema(1, 1, 1, 1).unwrap();
        let rows = 3;
        let mut f = Array2::zeros((rows, schema.len()));
        for t in 0..rows {
            for j in 0..schema.len() {
                f[[t, j]] = (t as f64 + 1.0) * 0.1 + j as f64 * 1.0e7 + 0.123456789123456;
            }
        }
        let labels = vec![FaultLabel::Normal, FaultLabel::CpuStress, FaultLabel::PacketLoss];
        (schema, DatasetTable::new(f, labels).unwrap())
    }

    #[test]
    fn dataset_csv_round_trips_exactly() {
        let (schema, table) = tiny_table();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_dataset_csv(&path, &table, &schema).unwrap();
        let back = read_dataset_csv(&path, &schema).unwrap();
        assert_eq!(back.labels, table.labels);
        assert_eq!(back.features, table.features); // bit-exact
    }

    #[test]
    fn dataset_csv_rejects_permuted_header() {
        let (schema, table) = tiny_table();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_dataset_csv(&path, &table, &schema).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let swapped = lines[0]
            .replacen("du1.active_ues", "XSWAPX", 1)
            .replacen("du1.dl_brate_cur_total", "du1.active_ues", 1)
            .replacen("XSWAPX", "du1.dl_brate_cur_total", 1);
        lines[0] = &swapped;
        std::fs::write(&path, lines.join("\n")).unwrap();
        match read_dataset_csv(&path, &schema) {
            Err(Error::HeaderMismatch { .. }) => {}
            other => panic!("expected header mismatch, got {other:?}"),
        }
    }

    #[test]
    fn dataset_csv_names_bad_cell() {
        let (schema, table) = tiny_table();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_dataset_csv(&path, &table, &schema).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        // Corrupt second data row, second feature column.
        let fields: Vec<&str> = lines[2].split(',').collect();
        let mut fields: Vec<String> = fields.iter().map(|s| s.to_string()).collect();
        fields[2] = "oops".into();
        lines[2] = fields.join(",");
        std::fs::write(&path, lines.join("\n")).unwrap();
        match read_dataset_csv(&path, &schema) {
            Err(Error::Cell { row, col, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(col, schema.columns()[1].id);
            }
            other => panic!("expected cell error, got {other:?}"),
        }
    }

    #[test]
    fn dataset_csv_rejects_unknown_label() {
        let (schema, table) = tiny_table();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_dataset_csv(&path, &table, &schema).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut fields: Vec<String> = lines[1].split(',').map(String::from).collect();
        let last = fields.len() - 1;
        fields[last] = "4".into();
        lines[1] = fields.join(",");
        std::fs::write(&path, lines.join("\n")).unwrap();
        match read_dataset_csv(&path, &schema) {
            Err(Error::Cell { row, col, msg, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(col, "label");
                assert!(msg.contains('4'), "{msg}");
            }
            other => panic!("expected label error, got {other:?}"),
        }
    }

    #[test]
    fn dataset_csv_rejects_non_finite() {
        let schema = build_default_schema(1, 1, 1, 1).unwrap();
        let f = array![[f64::NAN; 12]];
        // Bypass the writer's normal path by writing NaN text directly.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let table = DatasetTable::new(f.mapv(|_| 0.0), vec![FaultLabel::Normal]).unwrap();
        write_dataset_csv(&path, &table, &schema).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let patched = text.replace(&fmt_f64(0.0), "NaN");
        std::fs::write(&path, patched).unwrap();
        assert!(matches!(read_dataset_csv(&path, &schema), Err(Error::Cell { .. })));
    }

    #[test]
    fn schema_file_round_trips() {
        let s = build_default_schema(2, 1, 5, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("schema.csv");
        write_schema(&path, &s).unwrap();
        let back = read_schema(&path).unwrap();
        assert_eq!(back.columns(), s.columns());
        assert_eq!((back.n_du, back.n_cu), (2, 1));
    }
}
