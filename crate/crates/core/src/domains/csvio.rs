//! CSV datasets: header `f0,f1,...,f{D-1}[,label]`, one sample per row.

use std::path::Path;

use nalgebra::DMatrix;

use crate::data::{LabeledSet, UnlabeledSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CsvData {
    Labeled(LabeledSet),
    Unlabeled(UnlabeledSet),
}

impl CsvData {
    pub fn inputs(&self) -> &DMatrix<f64> {
        match self {
            CsvData::Labeled(s) => s.inputs(),
            CsvData::Unlabeled(s) => s.inputs(),
        }
    }

    pub fn into_labeled(self) -> Option<LabeledSet> {
        match self {
            CsvData::Labeled(s) => Some(s),
            CsvData::Unlabeled(_) => None,
        }
    }
}

/// Reads a dataset. A trailing `label` column makes it labelled.
///
/// With `num_classes = None` the label width is the largest label plus one.
pub fn load_csv(path: impl AsRef<Path>, num_classes: Option<usize>) -> Result<CsvData> {
    let path = path.as_ref();
    let fmt = |m: String| Error::format(path, m);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => fmt(format!("{other:?}")),
        })?;
    let headers = reader.headers().map_err(|e| fmt(e.to_string()))?.clone();
    let labelled = headers.iter().next_back() == Some("label");
    let dim = headers.len() - usize::from(labelled);
    for (i, h) in headers.iter().take(dim).enumerate() {
        if h != format!("f{i}") {
            return Err(fmt(format!("column {i} is named {h:?}, expected \"f{i}\"")));
        }
    }
    if dim == 0 {
        return Err(fmt("no feature columns".into()));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| fmt(e.to_string()))?;
        let row = line + 2;
        for cell in record.iter().take(dim) {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| fmt(format!("row {row}: non-numeric cell {cell:?}")))?;
            values.push(v);
        }
        if labelled {
            let cell = &record[dim];
            let label: usize = cell
                .trim()
                .parse()
                .map_err(|_| fmt(format!("row {row}: label {cell:?} is not a class index")))?;
            if let Some(k) = num_classes {
                if label >= k {
                    return Err(fmt(format!("row {row}: label {label} outside [0, {k})")));
                }
            }
            labels.push(label);
        }
    }
    let n = values.len() / dim;
    if n == 0 {
        return Err(fmt("no data rows".into()));
    }
    let inputs = DMatrix::from_row_slice(n, dim, &values);
    if labelled {
        let k = num_classes.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
        Ok(CsvData::Labeled(LabeledSet::from_indices(inputs, &labels, k)?))
    } else {
        Ok(CsvData::Unlabeled(UnlabeledSet::new(inputs)?))
    }
}

/// Writes a dataset in the schema [`load_csv`] reads.
pub fn save_csv(path: impl AsRef<Path>, data: &CsvData) -> Result<()> {
    let path = path.as_ref();
    let inputs = data.inputs();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    let mut header: Vec<String> = (0..inputs.ncols()).map(|i| format!("f{i}")).collect();
    let classes = match data {
        CsvData::Labeled(s) => {
            header.push("label".into());
            Some(s.classes())
        }
        CsvData::Unlabeled(_) => None,
    };
    w.write_record(&header).map_err(|e| Error::format(path, e))?;
    for (i, row) in inputs.row_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(f64::to_string).collect();
        if let Some(c) = &classes {
            rec.push(c[i].to_string());
        }
        w.write_record(&rec).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
