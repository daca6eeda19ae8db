use nalgebra::{DMatrix, DVector};

use super::grad::LogitLoss;
use crate::error::{Error, Result};

/// Softmax of one logit vector, shifted by the maximum before exponentiating.
pub fn softmax(logits: &DVector<f64>) -> Result<DVector<f64>> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax input"));
    }
    let max = logits.max();
    let exp = logits.map(|v| (v - max).exp());
    let sum = exp.sum();
    Ok(exp / sum)
}

/// Row-wise softmax of a `b × K` logit matrix.
pub fn softmax_rows(logits: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(log_softmax_rows(logits)?.map(f64::exp))
}

/// Row-wise log-softmax, `a_k - logsumexp(a)`.
pub fn log_softmax_rows(logits: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax input"));
    }
    let mut out = logits.clone();
    for mut row in out.row_iter_mut() {
        let max = row.max();
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.add_scalar_mut(-lse);
    }
    Ok(out)
}

/// Cross-entropy against targets smoothed to `y (1 - alpha) + alpha / K`,
/// averaged over the batch.
#[derive(Debug, Clone, Copy)]
pub struct SmoothedCrossEntropy<'a> {
    pub labels: &'a DMatrix<f64>,
    pub alpha: f64,
}

impl SmoothedCrossEntropy<'_> {
    fn smoothed(&self) -> DMatrix<f64> {
        let k = self.labels.ncols() as f64;
        self.labels.map(|y| y * (1.0 - self.alpha) + self.alpha / k)
    }
}

impl LogitLoss for SmoothedCrossEntropy<'_> {
    fn value_and_grad(&self, logits: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::OutOfRange(format!("label smoothing {} not in [0, 1)", self.alpha)));
        }
        if logits.shape() != self.labels.shape() {
            return Err(Error::DimensionMismatch {
                context: "cross-entropy labels",
                expected: logits.len(),
                actual: self.labels.len(),
            });
        }
        let b = logits.nrows() as f64;
        let targets = self.smoothed();
        let log_probs = log_softmax_rows(logits)?;
        let value = -targets.component_mul(&log_probs).sum() / b;
        let grad = (log_probs.map(f64::exp) - targets) / b;
        Ok((value, grad))
    }
}

/// Mean label-smoothed cross-entropy of a batch of logits.
pub fn label_smoothed_ce(logits: &DMatrix<f64>, labels: &DMatrix<f64>, alpha: f64) -> Result<f64> {
    SmoothedCrossEntropy { labels, alpha }
        .value_and_grad(logits)
        .map(|(v, _)| v)
}
