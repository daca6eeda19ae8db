use std::path::Path;

use super::{EntropyHistogram, GridCell, MetricsReport};
use crate::error::{Error, Result};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::format(path, e))
}

fn finish(path: &Path, mut w: csv::Writer<std::fs::File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// `x,y,class,confidence,weight`, one row per cell in grid order.
pub fn write_grid_csv(path: &Path, cells: &[GridCell]) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e: csv::Error| Error::format(path, e);
    w.write_record(["x", "y", "class", "confidence", "weight"]).map_err(err)?;
    for c in cells {
        w.write_record([
            c.x.to_string(),
            c.y.to_string(),
            c.class.to_string(),
            c.confidence.to_string(),
            c.weight.to_string(),
        ])
        .map_err(err)?;
    }
    finish(path, w)
}

/// `bin_lo,bin_hi,count_correct,count_incorrect`.
pub fn write_histogram_csv(path: &Path, hist: &EntropyHistogram) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e: csv::Error| Error::format(path, e);
    w.write_record(["bin_lo", "bin_hi", "count_correct", "count_incorrect"])
        .map_err(err)?;
    for (i, pair) in hist.edges.windows(2).enumerate() {
        w.write_record([
            pair[0].to_string(),
            pair[1].to_string(),
            hist.correct[i].to_string(),
            hist.incorrect[i].to_string(),
        ])
        .map_err(err)?;
    }
    finish(path, w)
}

/// `metric,value` rows: accuracy, os, os_star, per-class accuracies, then
/// `confusion_<true>_<pred>` counts.
pub fn write_metrics_csv(path: &Path, m: &MetricsReport) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e: csv::Error| Error::format(path, e);
    w.write_record(["metric", "value"]).map_err(err)?;
    let mut rows = vec![
        ("accuracy".to_string(), m.accuracy.to_string()),
        ("os".to_string(), m.os.to_string()),
        ("os_star".to_string(), m.os_star.to_string()),
    ];
    for (k, a) in m.per_class_acc.iter().enumerate() {
        rows.push((format!("acc_class_{k}"), a.to_string()));
    }
    for (t, row) in m.confusion.iter().enumerate() {
        for (p, count) in row.iter().enumerate() {
            rows.push((format!("confusion_{t}_{p}"), count.to_string()));
        }
    }
    for (k, v) in rows {
        w.write_record([k, v]).map_err(err)?;
    }
    finish(path, w)
}
