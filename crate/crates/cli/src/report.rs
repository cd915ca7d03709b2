//! The JSON report written for every run and its CSV sidecar.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: &str = "1";

/// Columns of plot data written beside the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: &[f64]) {
        self.push_labeled(None, row);
    }

    /// A row whose first cell is text.
    pub fn push_labeled(&mut self, label: Option<&str>, row: &[f64]) {
        let cells: Vec<String> = label.map(str::to_string).into_iter().chain(row.iter().map(f64::to_string)).collect();
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub path: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub command: String,
    pub config: BTreeMap<String, Value>,
    /// Non-finite values are written as `null`.
    pub metrics: BTreeMap<String, Option<f64>>,
    pub pass: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub plot_data: Option<PlotData>,
    pub runtime_ms: u64,
    pub seed: u64,
}

impl Report {
    pub fn new(command: &str, config: BTreeMap<String, Value>, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            command: command.to_string(),
            config,
            metrics: BTreeMap::new(),
            pass: None,
            flags: Vec::new(),
            error: None,
            plot_data: None,
            runtime_ms: 0,
            seed,
        }
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value.is_finite().then_some(value));
    }

    pub fn metrics_from(&mut self, map: &BTreeMap<String, f64>) {
        for (k, v) in map {
            self.metric(k, *v);
        }
    }
}

/// `r.json` → `r.csv`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("csv")
}

pub fn write_table(path: &Path, table: &Table) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()
}

pub fn write_report(path: &Path, report: &Report) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}
