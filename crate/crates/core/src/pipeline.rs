//! End-to-end toy experiment: source training, Laplace fit, then SHOT-IM and
//! U-SFAN adaptation from the same source model.

use crate::adaptation::{accuracy, adapt_target, train_source, AdaptConfig, AdaptOutcome, SourceReport};
use crate::data::LabeledSet;
use crate::domains::{gen_toy, BlobSpec};
use crate::error::Result;
use crate::laplace::{fit, Posterior};
use crate::netcore::DenseNet;

#[derive(Debug, Clone)]
pub struct ToyRun {
    pub source_set: LabeledSet,
    pub target_set: LabeledSet,
    pub source_net: DenseNet,
    pub source_report: SourceReport,
    pub posterior: Posterior,
    pub baseline: AdaptOutcome,
    pub usfan: AdaptOutcome,
    /// Target accuracy of the source model before adaptation.
    pub pre_accuracy: f64,
    pub baseline_accuracy: f64,
    pub usfan_accuracy: f64,
}

pub fn target_accuracy(net: &DenseNet, target: &LabeledSet) -> Result<f64> {
    Ok(accuracy(&net.forward(target.inputs())?.logits, &target.classes()))
}

/// Runs both adaptation modes on one seeded domain pair.
///
/// The network has the given hidden widths and is initialised from
/// `cfg.seed`; `cfg.baseline_mode` is ignored since both modes are run.
pub fn run_toy(spec: &BlobSpec, hidden: &[usize], cfg: &AdaptConfig) -> Result<ToyRun> {
    let (source_set, target_set) = gen_toy(spec)?;
    let mut dims = vec![source_set.input_dim()];
    dims.extend_from_slice(hidden);
    dims.push(source_set.num_classes());
    let init = DenseNet::seeded(&dims, cfg.seed)?;
    let (source_net, source_report) = train_source(&init, &source_set, cfg)?;
    let posterior = fit(&source_net, &source_set, &cfg.laplace)?;
    let unlabeled = target_set.unlabeled();

    let base_cfg = AdaptConfig { baseline_mode: true, ..cfg.clone() };
    let baseline = adapt_target(&source_net, None, &unlabeled, &base_cfg, None)?;
    let ug_cfg = AdaptConfig { baseline_mode: false, ..cfg.clone() };
    let usfan = adapt_target(&source_net, Some(&posterior), &unlabeled, &ug_cfg, None)?;

    Ok(ToyRun {
        pre_accuracy: target_accuracy(&source_net, &target_set)?,
        baseline_accuracy: target_accuracy(&baseline.net, &target_set)?,
        usfan_accuracy: target_accuracy(&usfan.net, &target_set)?,
        source_set,
        target_set,
        source_net,
        source_report,
        posterior,
        baseline,
        usfan,
    })
}
