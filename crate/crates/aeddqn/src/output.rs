//! Atomic file writes and the report CSVs.

use std::io::Write;
use std::path::Path;

use aeddqn_core::agent::MetricsLog;
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::{Error, Result};

/// Writes `bytes` to a temporary file beside `path` and renames it into place,
/// so a failed run never leaves a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

/// Writes rows with a header taken from the struct field names. An empty
/// row set still gets its header.
pub fn write_csv<R: Serialize>(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = R>,
) -> Result<()> {
    let mut bytes = csv_bytes(rows)?;
    if bytes.is_empty() {
        bytes = csv_bytes([header])?;
    }
    write_atomic(path, &bytes)
}

#[derive(Debug, Clone, Serialize)]
pub struct LossRow {
    pub epoch: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsCsvRow {
    pub episode: usize,
    pub epsilon: f64,
    /// Empty when no train step ran in the window.
    pub loss: Option<f64>,
    pub eval_accuracy: f64,
    pub eval_avg_reward: f64,
    pub eval_avg_features: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalRow {
    pub dataset: String,
    pub accuracy: f64,
    pub avg_reward: f64,
    pub avg_features_used: f64,
    /// Empty when no baseline model is available.
    pub baseline_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineRow {
    pub dataset: String,
    pub svm_accuracy: f64,
}

pub const LOSS_HEADER: &[&str] = &["epoch", "mse"];
pub const METRICS_HEADER: &[&str] = &[
    "episode",
    "epsilon",
    "loss",
    "eval_accuracy",
    "eval_avg_reward",
    "eval_avg_features",
];
pub const EVAL_HEADER: &[&str] = &[
    "dataset",
    "accuracy",
    "avg_reward",
    "avg_features_used",
    "baseline_accuracy",
];
pub const BASELINE_HEADER: &[&str] = &["dataset", "svm_accuracy"];

pub fn metrics_rows(log: &MetricsLog) -> Vec<MetricsCsvRow> {
    log.rows
        .iter()
        .map(|r| MetricsCsvRow {
            episode: r.episode,
            epsilon: r.epsilon,
            loss: r.loss.is_finite().then_some(r.loss),
            eval_accuracy: r.eval_accuracy,
            eval_avg_reward: r.eval_avg_reward,
            eval_avg_features: r.eval_avg_features,
        })
        .collect()
}
