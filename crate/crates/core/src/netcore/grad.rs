//! Reverse-mode gradients through the layer chain.

use nalgebra::{DMatrix, RowDVector};

use super::{DenseNet, ForwardTrace, Part};
use crate::error::{Error, Result};

/// A scalar batch loss of the logits, with its gradient wrt the logits.
pub trait LogitLoss {
    fn value_and_grad(&self, logits: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: DMatrix<f64>,
    pub bias: RowDVector<f64>,
}

/// Gradients for the requested parts of a network; `None` where not requested.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradients {
    pub feature: Option<Vec<LayerGrad>>,
    pub head: Option<LayerGrad>,
}

impl Gradients {
    pub fn part(&self, part: Part) -> bool {
        match part {
            Part::Feature => self.feature.is_some(),
            Part::Head => self.head.is_some(),
        }
    }
}

/// Backpropagates `loss` from the logits of `trace` into the requested parts.
///
/// Returns the loss value alongside the gradients. Requesting a frozen part
/// is an error; gradients still flow through a frozen head into the features.
pub fn backward(
    net: &DenseNet,
    trace: &ForwardTrace,
    loss: &dyn LogitLoss,
    parts: &[Part],
) -> Result<(f64, Gradients)> {
    for &part in parts {
        if net.is_frozen(part) {
            return Err(Error::FrozenPart(part.name()));
        }
    }
    if trace.pre.len() != net.layers.len() {
        return Err(Error::DimensionMismatch {
            context: "forward trace depth",
            expected: net.layers.len(),
            actual: trace.pre.len(),
        });
    }
    let want_feature = parts.contains(&Part::Feature);
    let want_head = parts.contains(&Part::Head);

    let (value, mut delta) = loss.value_and_grad(trace.logits())?;
    let mut grads = Gradients::default();
    let mut feature_grads = Vec::new();

    for l in (0..net.layers.len()).rev() {
        let layer = &net.layers[l];
        let activation = layer.activation;
        let pre = &trace.pre[l];
        let dpre = delta.zip_map(pre, |d, z| d * activation.derivative(z));
        let is_head = l == net.split_index;
        let needed = if is_head { want_head } else { want_feature };
        if needed {
            let input = &trace.inputs[l];
            let g = LayerGrad {
                weight: input.transpose() * &dpre,
                bias: row_sums(&dpre),
            };
            if is_head {
                grads.head = Some(g);
            } else {
                feature_grads.push(g);
            }
        }
        if l == 0 || (!want_feature && l <= net.split_index) {
            break;
        }
        delta = dpre * layer.weight.transpose();
    }
    if want_feature {
        feature_grads.reverse();
        grads.feature = Some(feature_grads);
    }
    Ok((value, grads))
}

fn row_sums(m: &DMatrix<f64>) -> RowDVector<f64> {
    m.row_sum()
}

impl DenseNet {
    /// Forward pass plus [`backward`] on the same batch.
    pub fn loss_and_grad(
        &self,
        batch: &DMatrix<f64>,
        loss: &dyn LogitLoss,
        parts: &[Part],
    ) -> Result<(f64, Gradients)> {
        let trace = self.forward_trace(batch)?;
        backward(self, &trace, loss, parts)
    }
}
