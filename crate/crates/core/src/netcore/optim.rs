use nalgebra::{DMatrix, RowDVector};
use serde::{Deserialize, Serialize};

use super::{DenseNet, Gradients, LayerGrad, Part};
use crate::error::{Error, Result};

/// Power-decay learning rate with momentum and weight decay.
///
/// `eta(p) = eta0 * (1 + decay_a * p)^(-decay_b)` where `p` is the fraction
/// of training completed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdSchedule {
    pub eta0: f64,
    pub decay_a: f64,
    pub decay_b: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdSchedule {
    fn default() -> Self {
        Self {
            eta0: 1e-2,
            decay_a: 10.0,
            decay_b: 0.75,
            momentum: 0.9,
            weight_decay: 5e-4,
        }
    }
}

impl SgdSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0.is_finite() && self.eta0 > 0.0) {
            return Err(Error::OutOfRange(format!("eta0 {} must be positive", self.eta0)));
        }
        if self.decay_a < 0.0 || self.decay_b < 0.0 {
            return Err(Error::OutOfRange("power-decay coefficients must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::OutOfRange(format!("momentum {} not in [0, 1)", self.momentum)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::OutOfRange(format!(
                "weight decay {} must be non-negative",
                self.weight_decay
            )));
        }
        Ok(())
    }

    pub fn eta(&self, progress: f64) -> f64 {
        self.eta0 * (1.0 + self.decay_a * progress).powf(-self.decay_b)
    }
}

/// Momentum SGD state for one network.
#[derive(Debug, Clone)]
pub struct Sgd {
    schedule: SgdSchedule,
    velocity: Vec<Option<LayerGrad>>,
}

impl Sgd {
    pub fn new(schedule: SgdSchedule) -> Result<Self> {
        schedule.validate()?;
        Ok(Self {
            schedule,
            velocity: Vec::new(),
        })
    }

    pub fn schedule(&self) -> &SgdSchedule {
        &self.schedule
    }

    /// Applies one update at learning rate `eta(progress)`.
    ///
    /// Parts without gradients are left untouched; gradients for a frozen part
    /// are rejected before anything is modified.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients, progress: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&progress) {
            return Err(Error::OutOfRange(format!("progress {progress} not in [0, 1]")));
        }
        for part in [Part::Feature, Part::Head] {
            if grads.part(part) && net.is_frozen(part) {
                return Err(Error::FrozenPart(part.name()));
            }
        }
        let split = net.split_index();
        if let Some(feature) = &grads.feature {
            if feature.len() != split {
                return Err(Error::DimensionMismatch {
                    context: "feature gradients",
                    expected: split,
                    actual: feature.len(),
                });
            }
        }
        if self.velocity.len() != net.layers().len() {
            self.velocity = vec![None; net.layers().len()];
        }
        let eta = self.schedule.eta(progress);
        let updates = grads
            .feature
            .iter()
            .flatten()
            .enumerate()
            .chain(grads.head.iter().map(|g| (split, g)));
        for (l, grad) in updates {
            let layer = &mut net.layers_mut()[l];
            if grad.weight.shape() != layer.weight.shape() || grad.bias.len() != layer.bias.len() {
                return Err(Error::DimensionMismatch {
                    context: "layer gradient",
                    expected: layer.weight.len(),
                    actual: grad.weight.len(),
                });
            }
            let v = self.velocity[l].get_or_insert_with(|| LayerGrad {
                weight: DMatrix::zeros(layer.weight.nrows(), layer.weight.ncols()),
                bias: RowDVector::zeros(layer.bias.len()),
            });
            let (mu, wd) = (self.schedule.momentum, self.schedule.weight_decay);
            v.weight = &v.weight * mu + &grad.weight + &layer.weight * wd;
            v.bias = &v.bias * mu + &grad.bias + &layer.bias * wd;
            layer.weight -= &v.weight * eta;
            layer.bias -= &v.bias * eta;
        }
        Ok(())
    }
}
