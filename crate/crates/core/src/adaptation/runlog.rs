use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// One mini-batch of target adaptation.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptLogRow {
    pub epoch: usize,
    pub batch: usize,
    pub loss_total: f64,
    pub loss_ent_ug: f64,
    pub loss_div: f64,
    pub mean_weight: f64,
    /// Accuracy on labelled target data after the step, when labels are available.
    pub target_acc: Option<f64>,
}

pub const RUN_LOG_COLUMNS: [&str; 7] = [
    "epoch",
    "batch",
    "loss_total",
    "loss_ent_ug",
    "loss_div",
    "mean_weight",
    "target_acc_if_labels_available",
];

/// Writes the adaptation log: a `# mode=...` comment line, then CSV.
pub fn write_run_log(path: &Path, mode: &str, rows: &[AdaptLogRow]) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(file, "# mode={mode}").map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let to_err = |e: csv::Error| Error::format(path, e);
    w.write_record(RUN_LOG_COLUMNS).map_err(to_err)?;
    for r in rows {
        w.write_record([
            r.epoch.to_string(),
            r.batch.to_string(),
            r.loss_total.to_string(),
            r.loss_ent_ug.to_string(),
            r.loss_div.to_string(),
            r.mean_weight.to_string(),
            r.target_acc.map(|a| a.to_string()).unwrap_or_default(),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
