mod common;

use common::{batches, rows, PlainShotIm};
use nalgebra::DVector;
use usfan::adaptation::{adapt_target, adapt_target_observed, train_source, AdaptConfig, UsfanObjective};
use usfan::domains::{gen_toy, toy_adapt_config, toy_dims, BlobSpec, Preset};
use usfan::laplace::fit;
use usfan::netcore::{DenseNet, Part};

fn source_model(seed: u64) -> (DenseNet, usfan::LabeledSet, usfan::LabeledSet, AdaptConfig) {
    let mut cfg = toy_adapt_config(seed);
    cfg.epochs_source = 20;
    let (source, target) = gen_toy(&BlobSpec::preset(Preset::Strong, 60, seed)).unwrap();
    let (net, _) = train_source(&DenseNet::seeded(&toy_dims(), seed).unwrap(), &source, &cfg).unwrap();
    (net, source, target, cfg)
}

#[test]
fn baseline_matches_plain_shot_im_step_by_step() {
    let (net, _, target, mut cfg) = source_model(1);
    cfg.baseline_mode = true;
    cfg.batch_size = 32;
    cfg.epochs_target = 17; // 180 rows / 32 = 6 batches per epoch, 102 steps
    let n = target.len();
    let total = (6 * cfg.epochs_target) as f64;
    let s = cfg.schedule;
    let mut oracle = PlainShotIm::from_net(&net, cfg.gamma, s.eta0, s.momentum, s.weight_decay);
    let mut plan = Vec::new();
    for e in 0..cfg.epochs_target {
        plan.extend(batches(cfg.seed, e, n, cfg.batch_size));
    }
    let mut step = 0;
    let mut worst_loss: f64 = 0.0;
    let mut worst_param: f64 = 0.0;
    adapt_target_observed(&net, None, &target.unlabeled(), &cfg, None, &mut |row, net| {
        let x = rows(target.inputs(), &plan[step]);
        let out = oracle.step(&x, step as f64 / total);
        worst_loss = worst_loss.max((out.loss - row.loss_total).abs());
        worst_loss = worst_loss.max((out.div - row.loss_div).abs());
        worst_loss = worst_loss.max((out.ent - row.loss_ent_ug).abs());
        worst_param = worst_param.max(oracle.max_param_diff(net));
        step += 1;
    })
    .unwrap();
    assert!(step >= 100);
    assert!(worst_loss < 1e-12, "loss drift {worst_loss:e}");
    assert!(worst_param < 1e-12, "parameter drift {worst_param:e}");
}

#[test]
fn head_is_never_updated_and_runs_are_deterministic() {
    let (net, source, target, mut cfg) = source_model(2);
    cfg.epochs_target = 3;
    let post = fit(&net, &source, &cfg.laplace).unwrap();
    let a = adapt_target(&net, Some(&post), &target.unlabeled(), &cfg, Some(&target)).unwrap();
    let b = adapt_target(&net, Some(&post), &target.unlabeled(), &cfg, Some(&target)).unwrap();
    assert_eq!(a.net.fingerprint(Part::Head), net.fingerprint(Part::Head));
    assert_ne!(a.net.fingerprint(Part::Feature), net.fingerprint(Part::Feature));
    assert_eq!(a.net.fingerprint(Part::Feature), b.net.fingerprint(Part::Feature));
    assert_eq!(a.log.len(), b.log.len());
    assert!(a.log.iter().zip(&b.log).all(|(x, y)| x.loss_total.to_bits() == y.loss_total.to_bits()));
    assert!(a.log.iter().all(|r| r.target_acc.is_some() && (1.0 / 3.0..=1.0).contains(&r.mean_weight)));
}

#[test]
fn weights_enter_the_gradient_as_constants() {
    // Were w differentiated, the gradient would not be linear in w.
    let (net, _, target, _) = source_model(3);
    let x = target.inputs().rows(0, 20).into_owned();
    let w1 = DVector::from_fn(20, |i, _| 0.4 + 0.03 * i as f64);
    let w2 = DVector::from_fn(20, |i, _| 1.0 - 0.02 * i as f64);
    let grad = |w: &DVector<f64>| {
        let loss = UsfanObjective { weights: w, gamma: 0.0 };
        net.loss_and_grad(&x, &loss, &[Part::Feature]).unwrap().1.feature.unwrap()
    };
    let (g1, g2, g12) = (grad(&w1), grad(&w2), grad(&(&w1 + &w2)));
    for l in 0..g1.len() {
        let sum = &g1[l].weight + &g2[l].weight;
        assert!((&g12[l].weight - sum).amax() < 1e-12);
    }
}

#[test]
fn missing_posterior_is_a_config_error() {
    let (net, _, target, cfg) = source_model(4);
    let err = adapt_target(&net, None, &target.unlabeled(), &cfg, None).unwrap_err();
    assert!(err.to_string().contains("fit-laplace"));
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn oversized_batch_is_clamped() {
    let (net, _, target, mut cfg) = source_model(5);
    cfg.baseline_mode = true;
    cfg.batch_size = 10_000;
    cfg.epochs_target = 2;
    let out = adapt_target(&net, None, &target.unlabeled(), &cfg, None).unwrap();
    assert_eq!(out.log.len(), 2);
}
