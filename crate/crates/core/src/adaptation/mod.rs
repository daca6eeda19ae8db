//! Source training and uncertainty-guided target adaptation.
//!
//! Source training minimizes label-smoothed cross-entropy over the whole
//! network. Target adaptation freezes the head and updates only the feature
//! extractor on unlabelled data with the weighted IM objective; sample
//! weights come from a fixed Laplace posterior over the head, with fresh
//! posterior draws for every mini-batch.

mod losses;
mod runlog;

pub use losses::{
    loss_div, loss_ent, loss_ent_ug, mean_prediction, usfan_loss, UsfanObjective,
};
pub use runlog::{write_run_log, AdaptLogRow};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{LabeledSet, UnlabeledSet};
use crate::error::{Error, Result};
use crate::laplace::{entropy_weights, LaplaceConfig, Posterior};
use crate::netcore::{
    argmax, augment_bias, backward, softmax_rows, DenseNet, Part, Sgd, SgdSchedule,
    SmoothedCrossEntropy,
};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptConfig {
    /// Label smoothing α for source training.
    pub alpha: f64,
    /// Diversity mixing γ.
    pub gamma: f64,
    pub batch_size: usize,
    pub epochs_source: usize,
    pub epochs_target: usize,
    pub schedule: SgdSchedule,
    pub laplace: LaplaceConfig,
    /// Forces unit weights, i.e. plain SHOT-IM.
    pub baseline_mode: bool,
    pub seed: u64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.5,
            batch_size: 64,
            epochs_source: 100,
            epochs_target: 30,
            schedule: SgdSchedule::default(),
            laplace: LaplaceConfig::default(),
            baseline_mode: false,
            seed: 0,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::OutOfRange(format!("alpha {} not in [0, 1)", self.alpha)));
        }
        losses::check_gamma(self.gamma)?;
        if self.batch_size == 0 {
            return Err(Error::OutOfRange("batch_size must be positive".into()));
        }
        if self.epochs_source == 0 || self.epochs_target == 0 {
            return Err(Error::OutOfRange("epoch budgets must be positive".into()));
        }
        self.schedule.validate()?;
        self.laplace.validate()
    }
}

/// Shuffled mini-batch index lists for one epoch.
///
/// The final batch may be shorter. Batches larger than the dataset are
/// clamped to it.
pub fn epoch_batches(rng: &mut rng::Rng, n: usize, batch_size: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size.clamp(1, n.max(1))).map(<[usize]>::to_vec).collect()
}

/// Row indices of the target batch for `(seed, epoch)` during adaptation.
pub fn target_batches(seed: u64, epoch: usize, n: usize, batch_size: usize) -> Vec<Vec<usize>> {
    epoch_batches(&mut rng::stream(seed, Stream::Shuffle { epoch: epoch as u32 }), n, batch_size)
}

fn steps_per_epoch(n: usize, batch_size: usize) -> usize {
    n.div_ceil(batch_size.clamp(1, n))
}

fn effective_batch(n: usize, batch_size: usize) -> usize {
    if batch_size > n {
        log::warn!("batch size {batch_size} exceeds dataset size {n}; clamping");
        n
    } else {
        batch_size
    }
}

/// Fraction of correct argmax predictions.
pub fn accuracy(probs_or_logits: &DMatrix<f64>, classes: &[usize]) -> f64 {
    let hits = probs_or_logits
        .row_iter()
        .zip(classes)
        .filter(|(row, &c)| argmax(row.iter().copied()) == c)
        .count();
    hits as f64 / classes.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceReport {
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
}

/// Trains all parameters on the labelled source data.
pub fn train_source(
    net: &DenseNet,
    source: &LabeledSet,
    cfg: &AdaptConfig,
) -> Result<(DenseNet, SourceReport)> {
    cfg.validate()?;
    if source.is_empty() {
        return Err(Error::InvalidData("source set is empty".into()));
    }
    if source.num_classes() != net.num_classes() {
        return Err(Error::DimensionMismatch {
            context: "source classes",
            expected: net.num_classes(),
            actual: source.num_classes(),
        });
    }
    let mut net = net.clone();
    net.unfreeze(Part::Feature);
    net.unfreeze(Part::Head);
    let n = source.len();
    let batch_size = effective_batch(n, cfg.batch_size);
    let total = (steps_per_epoch(n, batch_size) * cfg.epochs_source) as f64;
    let mut sgd = Sgd::new(cfg.schedule)?;
    let mut step = 0usize;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs_source);
    for epoch in 0..cfg.epochs_source {
        let mut shuffle = rng::stream(cfg.seed, Stream::SourceShuffle { epoch: epoch as u32 });
        let mut sum = 0.0;
        for idx in epoch_batches(&mut shuffle, n, batch_size) {
            let x = source.inputs().select_rows(idx.iter());
            let y = source.labels().select_rows(idx.iter());
            let loss = SmoothedCrossEntropy {
                labels: &y,
                alpha: cfg.alpha,
            };
            let trace = net.forward_trace(&x)?;
            let (value, grads) = backward(&net, &trace, &loss, &[Part::Feature, Part::Head])?;
            if !value.is_finite() {
                return Err(Error::NonFinite("source loss"));
            }
            sgd.step(&mut net, &grads, step as f64 / total)?;
            step += 1;
            sum += value * idx.len() as f64;
        }
        epoch_losses.push(sum / n as f64);
    }
    let logits = net.forward(source.inputs())?.logits;
    let train_accuracy = accuracy(&logits, &source.classes());
    Ok((
        net,
        SourceReport {
            epoch_losses,
            train_accuracy,
        },
    ))
}

/// Adapted network plus one log row per mini-batch.
#[derive(Debug, Clone)]
pub struct AdaptOutcome {
    pub net: DenseNet,
    pub log: Vec<AdaptLogRow>,
}

/// Per-sample weights for a batch of latents under the posterior.
pub fn batch_weights(
    posterior: &Posterior,
    latents: &DMatrix<f64>,
    cfg: &LaplaceConfig,
    rng: &mut rng::Rng,
) -> Result<DVector<f64>> {
    let pbar = posterior.predictive_mean(&augment_bias(latents), cfg, rng)?;
    entropy_weights(&pbar)
}

/// Updates the feature extractor on unlabelled target data with the head frozen.
///
/// Without `baseline_mode` a posterior is required. `monitor` is used only to
/// fill the accuracy column of the log; it never influences the updates.
pub fn adapt_target(
    net: &DenseNet,
    posterior: Option<&Posterior>,
    target: &UnlabeledSet,
    cfg: &AdaptConfig,
    monitor: Option<&LabeledSet>,
) -> Result<AdaptOutcome> {
    adapt_target_observed(net, posterior, target, cfg, monitor, &mut |_, _| {})
}

/// As [`adapt_target`], calling `observe` after every optimizer step with
/// that step's log row and the updated network.
pub fn adapt_target_observed(
    net: &DenseNet,
    posterior: Option<&Posterior>,
    target: &UnlabeledSet,
    cfg: &AdaptConfig,
    monitor: Option<&LabeledSet>,
    observe: &mut dyn FnMut(&AdaptLogRow, &DenseNet),
) -> Result<AdaptOutcome> {
    cfg.validate()?;
    let posterior = match (posterior, cfg.baseline_mode) {
        (_, true) => None,
        (Some(p), false) => Some(p),
        (None, false) => {
            return Err(Error::Config(
                "uncertainty-guided adaptation needs a fitted posterior; run fit-laplace first".into(),
            ))
        }
    };
    if let Some(p) = posterior {
        if p.rows() != net.latent_dim() + 1 || p.classes() != net.num_classes() {
            return Err(Error::DimensionMismatch {
                context: "posterior head shape",
                expected: (net.latent_dim() + 1) * net.num_classes(),
                actual: p.rows() * p.classes(),
            });
        }
    }
    let mut net = net.clone();
    net.freeze(Part::Head);
    net.unfreeze(Part::Feature);

    let n = target.len();
    let batch_size = effective_batch(n, cfg.batch_size);
    let total = (steps_per_epoch(n, batch_size) * cfg.epochs_target) as f64;
    let mut sgd = Sgd::new(cfg.schedule)?;
    let mut posterior_rng = rng::stream(cfg.seed, Stream::Posterior);
    let monitor_classes = monitor.map(LabeledSet::classes);
    let mut log = Vec::new();
    let mut step = 0usize;

    for epoch in 0..cfg.epochs_target {
        for (b, idx) in target_batches(cfg.seed, epoch, n, batch_size).into_iter().enumerate() {
            let x = target.inputs().select_rows(idx.iter());
            let trace = net.forward_trace(&x)?;
            let weights = match posterior {
                Some(p) => batch_weights(p, trace.latents(), &cfg.laplace, &mut posterior_rng)?,
                None => DVector::from_element(idx.len(), 1.0),
            };
            let objective = UsfanObjective {
                weights: &weights,
                gamma: cfg.gamma,
            };
            let (total_loss, grads) = backward(&net, &trace, &objective, &[Part::Feature])?;
            if !total_loss.is_finite() {
                return Err(Error::NonFinite("adaptation loss"));
            }
            let probs = softmax_rows(trace.logits())?;
            let row = AdaptLogRow {
                epoch,
                batch: b,
                loss_total: total_loss,
                loss_ent_ug: loss_ent_ug(&probs, &weights)?,
                loss_div: loss_div(&probs),
                mean_weight: weights.mean(),
                target_acc: None,
            };
            sgd.step(&mut net, &grads, step as f64 / total)?;
            step += 1;
            let target_acc = match (monitor, &monitor_classes) {
                (Some(m), Some(classes)) => Some(accuracy(&net.forward(m.inputs())?.logits, classes)),
                _ => None,
            };
            let row = AdaptLogRow { target_acc, ..row };
            observe(&row, &net);
            log.push(row);
        }
    }
    Ok(AdaptOutcome { net, log })
}
