//! Threshold metrics, rank-based AUC and the model comparison table.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::average_ranks;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

/// Harmonic mean of precision and recall; 0 when either is undefined or
/// both are zero.
pub fn f1_score(precision: Option<f64>, recall: Option<f64>) -> f64 {
    match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => 2.0 * p * r / (p + r),
        _ => 0.0,
    }
}

fn check_labels(scores: &[f64], y: &[u8]) -> Result<()> {
    if scores.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} labels",
            scores.len(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::InvalidArgument("no observations to score".into()));
    }
    if let Some(i) = y.iter().position(|&v| v > 1) {
        return Err(Error::InvalidArgument(format!("label at {i} is not 0/1")));
    }
    Ok(())
}

pub fn confusion(scores: &[f64], y: &[u8], threshold: f64) -> Result<ConfusionCounts> {
    check_labels(scores, y)?;
    let mut c = ConfusionCounts::default();
    for (&s, &t) in scores.iter().zip(y) {
        match (s >= threshold, t == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Area under the ROC curve from the Mann-Whitney rank statistic; tied
/// scores count one half.
pub fn auc(scores: &[f64], y: &[u8]) -> Result<f64> {
    check_labels(scores, y)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let n1 = y.iter().filter(|&&v| v == 1).count();
    let n0 = y.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::Data("AUC needs both classes present".into()));
    }
    let ranks = average_ranks(scores);
    let r1: f64 = ranks.iter().zip(y).filter(|(_, &t)| t == 1).map(|(r, _)| r).sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    Ok(u / (n1 as f64 * n0 as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub model: String,
    /// `None` when the model predicts no positives.
    pub precision: Option<f64>,
    /// `None` when the evaluation set has no positives.
    pub recall: Option<f64>,
    pub auc: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub threshold: f64,
    pub confusion: ConfusionCounts,
}

pub fn compute_metrics(model: &str, scores: &[f64], y: &[u8], threshold: f64) -> Result<ModelMetrics> {
    check_labels(scores, y)?;
    if let Some(i) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::InvalidArgument(format!("score {} at {i} is outside [0, 1]", scores[i])));
    }
    let c = confusion(scores, y, threshold)?;
    let precision = c.precision();
    let recall = c.recall();
    if precision.is_none() {
        log::warn!("{model}: no positive predictions at threshold {threshold}; precision undefined");
    }
    if recall.is_none() {
        log::warn!("{model}: no positive labels; recall undefined");
    }
    Ok(ModelMetrics {
        model: model.to_string(),
        precision,
        recall,
        auc: auc(scores, y)?,
        f1: f1_score(precision, recall),
        accuracy: c.accuracy(),
        threshold,
        confusion: c,
    })
}

/// Metric columns in table order.
pub const METRIC_COLUMNS: [&str; 5] = ["precision", "recall", "auc", "f1", "accuracy"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    /// Free-text description of how the evaluation rows were obtained.
    #[serde(default)]
    pub protocol: String,
    pub rows: Vec<ModelMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyBar {
    pub model: String,
    pub accuracy: f64,
}

pub fn compare_models(reports: Vec<ModelMetrics>) -> Result<ComparisonTable> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no models to compare".into()));
    }
    Ok(ComparisonTable {
        protocol: String::new(),
        rows: reports,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

impl ComparisonTable {
    pub fn with_protocol(mut self, protocol: impl Into<String>) -> Self {
        self.protocol = protocol.into();
        self
    }

    pub fn accuracy_series(&self) -> Vec<AccuracyBar> {
        self.rows
            .iter()
            .map(|r| AccuracyBar {
                model: r.model.clone(),
                accuracy: r.accuracy,
            })
            .collect()
    }

    pub fn best_auc(&self) -> &ModelMetrics {
        self.rows
            .iter()
            .max_by(|a, b| a.auc.total_cmp(&b.auc))
            .expect("table is non-empty")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        let mut header = vec!["model"];
        header.extend(METRIC_COLUMNS);
        header.extend(["threshold", "protocol"]);
        w.write_record(&header)?;
        for r in &self.rows {
            w.write_record([
                r.model.clone(),
                fmt_opt(r.precision),
                fmt_opt(r.recall),
                format!("{:.4}", r.auc),
                format!("{:.4}", r.f1),
                format!("{:.4}", r.accuracy),
                format!("{}", r.threshold),
                self.protocol.clone(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn write_accuracy_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), &self.accuracy_series())?;
        Ok(())
    }
}
