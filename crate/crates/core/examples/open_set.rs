//! Open-set evaluation with an entropy-threshold unknown rule.
//!
//! The target has a fourth class the source never saw. Samples whose
//! predictive entropy exceeds the 99th percentile of entropy on held-out
//! source data are labelled unknown. This rule is a stand-in: nothing here
//! claims it is how open-set benchmarks were scored elsewhere.

use usfan::adaptation::{adapt_target, train_source};
use usfan::domains::{gen_open_set, gen_toy, toy_adapt_config, toy_dims, BlobSpec, OpenSetSpec, Preset};
use usfan::evaluation::{entropy_threshold, evaluate, Model};
use usfan::laplace::fit;
use usfan::netcore::DenseNet;

fn main() -> usfan::Result<()> {
    let cfg = toy_adapt_config(0);
    let base = BlobSpec::preset(Preset::Mild, 150, 0);
    let (source, target) = gen_open_set(&OpenSetSpec::far_private(base.clone(), 50))?;
    let (holdout, _) = gen_toy(&BlobSpec { seed: 1000, ..base })?;

    let (net, _) = train_source(&DenseNet::seeded(&toy_dims(), 0)?, &source, &cfg)?;
    let posterior = fit(&net, &source, &cfg.laplace)?;
    let adapted = adapt_target(&net, Some(&posterior), &target.unlabeled(), &cfg, None)?.net;

    println!("model     threshold  accuracy  os     os*    unknown recall");
    for (name, net) in [("source", &net), ("adapted", &adapted)] {
        let model = Model::Predictive { net, posterior: &posterior, cfg: cfg.laplace, seed: 0 };
        let rule = entropy_threshold(&model, holdout.inputs(), 0.99)?;
        let m = evaluate(&model, &target, Some(rule))?;
        println!(
            "{name:<8}  {:>9.4}  {:>8.3}  {:.3}  {:.3}  {:.3}",
            rule.entropy_threshold, m.accuracy, m.os, m.os_star, m.per_class_acc[3]
        );
    }
    Ok(())
}
