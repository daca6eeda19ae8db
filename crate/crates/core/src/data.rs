//! Source and target datasets.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Inputs with one-hot class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    inputs: DMatrix<f64>,
    labels: DMatrix<f64>,
}

impl LabeledSet {
    /// Builds a set from an n×D input matrix and an n×K one-hot label matrix.
    pub fn new(inputs: DMatrix<f64>, labels: DMatrix<f64>) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::InvalidData("labelled set is empty".into()));
        }
        check_finite(&inputs)?;
        if labels.nrows() != inputs.nrows() {
            return Err(Error::DimensionMismatch {
                context: "label rows",
                expected: inputs.nrows(),
                actual: labels.nrows(),
            });
        }
        for (i, row) in labels.row_iter().enumerate() {
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(Error::InvalidData(format!("label row {i} is not one-hot")));
            }
        }
        Ok(Self { inputs, labels })
    }

    /// Builds a set from class indices in `[0, num_classes)`.
    pub fn from_indices(inputs: DMatrix<f64>, classes: &[usize], num_classes: usize) -> Result<Self> {
        if classes.len() != inputs.nrows() {
            return Err(Error::DimensionMismatch {
                context: "label count",
                expected: inputs.nrows(),
                actual: classes.len(),
            });
        }
        let mut labels = DMatrix::zeros(classes.len(), num_classes);
        for (i, &c) in classes.iter().enumerate() {
            if c >= num_classes {
                return Err(Error::InvalidData(format!(
                    "label {c} outside [0, {num_classes})"
                )));
            }
            labels[(i, c)] = 1.0;
        }
        Self::new(inputs, labels)
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn labels(&self) -> &DMatrix<f64> {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.ncols()
    }

    /// Class index per row.
    pub fn classes(&self) -> Vec<usize> {
        self.labels
            .row_iter()
            .map(|row| row.iter().position(|&v| v == 1.0).unwrap_or(0))
            .collect()
    }

    /// Drops the labels. Used to hand target data to adaptation.
    pub fn unlabeled(&self) -> UnlabeledSet {
        UnlabeledSet {
            inputs: self.inputs.clone(),
        }
    }

    /// Rows whose label is below `num_classes`, relabelled with width `num_classes`.
    pub fn restrict_to_classes(&self, num_classes: usize) -> Result<Self> {
        let (rows, classes): (Vec<usize>, Vec<usize>) = self
            .classes()
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c < num_classes)
            .unzip();
        let inputs = self.inputs.select_rows(rows.iter());
        Self::from_indices(inputs, &classes, num_classes)
    }
}

fn check_finite(inputs: &DMatrix<f64>) -> Result<()> {
    match inputs.iter().position(|v| !v.is_finite()) {
        // Column-major position back to (row, column).
        Some(i) => Err(Error::InvalidData(format!(
            "non-finite input at row {}, column {}",
            i % inputs.nrows(),
            i / inputs.nrows()
        ))),
        None => Ok(()),
    }
}

/// Inputs only.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledSet {
    inputs: DMatrix<f64>,
}

impl UnlabeledSet {
    pub fn new(inputs: DMatrix<f64>) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::InvalidData("unlabelled set is empty".into()));
        }
        check_finite(&inputs)?;
        Ok(Self { inputs })
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }
}
