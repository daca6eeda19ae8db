//! Oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use usfan::adaptation::{target_batches, UsfanObjective};
use usfan::netcore::{DenseNet, LogitLoss, Part, SmoothedCrossEntropy};
use usfan::rng::{stream, Stream};

pub const FD_STEP: f64 = 1e-5;

type Rows = Vec<Vec<f64>>;

/// Number of scalar parameters, weights before bias, layer by layer.
pub fn num_params(net: &DenseNet) -> usize {
    net.layers().iter().map(|l| l.weight.len() + l.bias.len()).sum()
}

fn param_mut(net: &mut DenseNet, mut idx: usize) -> &mut f64 {
    for layer in net.layers_mut() {
        if idx < layer.weight.len() {
            return &mut layer.weight[idx];
        }
        idx -= layer.weight.len();
        if idx < layer.bias.len() {
            return &mut layer.bias[idx];
        }
        idx -= layer.bias.len();
    }
    panic!("parameter index out of range");
}

/// Analytic gradient flattened in the same order as [`param_mut`].
pub fn analytic_gradient(net: &DenseNet, x: &DMatrix<f64>, loss: &dyn LogitLoss) -> Vec<f64> {
    let (_, g) = net.loss_and_grad(x, loss, &[Part::Feature, Part::Head]).unwrap();
    let mut flat = Vec::new();
    for lg in g.feature.unwrap().iter().chain(std::iter::once(&g.head.unwrap())) {
        flat.extend(lg.weight.iter().copied());
        flat.extend(lg.bias.iter().copied());
    }
    flat
}

pub fn loss_value(net: &DenseNet, x: &DMatrix<f64>, loss: &dyn LogitLoss) -> f64 {
    loss.value_and_grad(&net.forward(x).unwrap().logits).unwrap().0
}

/// Central-difference gradient with step [`FD_STEP`].
pub fn numeric_gradient(net: &DenseNet, x: &DMatrix<f64>, loss: &dyn LogitLoss) -> Vec<f64> {
    let mut probe = net.clone();
    (0..num_params(net))
        .map(|i| {
            let orig = *param_mut(&mut probe, i);
            *param_mut(&mut probe, i) = orig + FD_STEP;
            let up = loss_value(&probe, x, loss);
            *param_mut(&mut probe, i) = orig - FD_STEP;
            let down = loss_value(&probe, x, loss);
            *param_mut(&mut probe, i) = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `|a - n| / max(|a|, |n|, 1e-7)`: relative, with an absolute floor for
/// gradients that vanish.
pub fn relative_errors(analytic: &[f64], numeric: &[f64]) -> Vec<f64> {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-7))
        .collect()
}

/// Smallest |pre-activation| over hidden units; finite differences break if
/// it is below the step size.
pub fn relu_margin(net: &DenseNet, x: &DMatrix<f64>) -> f64 {
    let trace = net.forward_trace(x).unwrap();
    let pre = trace.pre_activations();
    pre[..pre.len() - 1]
        .iter()
        .flat_map(|m| m.iter().map(|v| v.abs()))
        .fold(f64::INFINITY, f64::min)
}

pub struct GradCase {
    pub shape: &'static str,
    pub net: DenseNet,
    pub x: DMatrix<f64>,
    pub labels: DMatrix<f64>,
    pub weights: DVector<f64>,
}

/// The two shapes under test, with Gaussian inputs, cyclic labels and
/// weights drawn from `[1/3, 1]`. Each shape takes the first seed whose
/// pre-activations all stay 100 steps away from the ReLU kink.
pub fn grad_cases() -> Vec<GradCase> {
    [("2-8-3", vec![2, 8, 3]), ("2-16-16-3", vec![2, 16, 16, 3])]
        .into_iter()
        .map(|(shape, dims)| {
            (0u64..)
                .map(|seed| {
                    let net = DenseNet::seeded(&dims, seed).unwrap();
                    let mut rng = stream(seed, Stream::Data);
                    let x = DMatrix::from_fn(12, 2, |_, _| StandardNormal.sample(&mut rng));
                    let labels = DMatrix::from_fn(12, 3, |i, j| f64::from(u8::from(i % 3 == j)));
                    let weights = DVector::from_fn(12, |_, _| rng.random_range(1.0 / 3.0..=1.0));
                    GradCase { shape, net, x, labels, weights }
                })
                .find(|c| relu_margin(&c.net, &c.x) > 100.0 * FD_STEP)
                .unwrap()
        })
        .collect()
}

/// Every logit loss in the crate, by name.
pub fn all_losses<'a>(case: &'a GradCase, ones: &'a DVector<f64>) -> Vec<(&'static str, Box<dyn LogitLoss + 'a>)> {
    vec![
        ("cross_entropy", Box::new(SmoothedCrossEntropy { labels: &case.labels, alpha: 0.1 })),
        ("entropy", Box::new(UsfanObjective { weights: ones, gamma: 0.0 })),
        ("diversity", Box::new(UsfanObjective { weights: ones, gamma: 1.0 })),
        ("weighted_entropy", Box::new(UsfanObjective { weights: &case.weights, gamma: 0.0 })),
        ("usfan", Box::new(UsfanObjective { weights: &case.weights, gamma: 0.5 })),
    ]
}

/// SHOT-IM written out with plain loops: forward pass, entropy and
/// diversity terms, backprop by the chain rule through the softmax Jacobian,
/// and SGD with momentum and weight decay on the feature layers only.
pub struct PlainShotIm {
    /// `w[l][i][o]`, `b[l][o]`; the last layer is the frozen head.
    pub w: Vec<Vec<Vec<f64>>>,
    pub b: Vec<Vec<f64>>,
    vw: Vec<Vec<Vec<f64>>>,
    vb: Vec<Vec<f64>>,
    pub gamma: f64,
    pub eta0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

pub struct PlainStep {
    pub loss: f64,
    pub ent: f64,
    pub div: f64,
}

impl PlainShotIm {
    pub fn from_net(net: &DenseNet, gamma: f64, eta0: f64, momentum: f64, weight_decay: f64) -> Self {
        let w: Vec<Vec<Vec<f64>>> = net
            .layers()
            .iter()
            .map(|l| (0..l.in_dim()).map(|i| (0..l.out_dim()).map(|o| l.weight[(i, o)]).collect()).collect())
            .collect();
        let b: Vec<Vec<f64>> = net.layers().iter().map(|l| l.bias.iter().copied().collect()).collect();
        let vw = w.iter().map(|m| m.iter().map(|r| vec![0.0; r.len()]).collect()).collect();
        let vb = b.iter().map(|v| vec![0.0; v.len()]).collect();
        Self { w, b, vw, vb, gamma, eta0, momentum, weight_decay }
    }

    /// Activations per layer input (logits last) and pre-activations per layer.
    fn forward(&self, x: &[Vec<f64>]) -> (Vec<Rows>, Vec<Rows>) {
        let last = self.w.len() - 1;
        let mut acts = vec![x.to_vec()];
        let mut pres = Vec::new();
        for l in 0..self.w.len() {
            let input = acts.last().unwrap();
            let pre: Vec<Vec<f64>> = input
                .iter()
                .map(|row| {
                    (0..self.b[l].len())
                        .map(|o| self.b[l][o] + (0..row.len()).map(|i| row[i] * self.w[l][i][o]).sum::<f64>())
                        .collect()
                })
                .collect();
            let out = if l == last {
                pre.clone()
            } else {
                pre.iter().map(|r| r.iter().map(|v| v.max(0.0)).collect()).collect()
            };
            pres.push(pre);
            acts.push(out);
        }
        (acts, pres)
    }

    /// One update on the rows `x` at schedule progress `progress`.
    pub fn step(&mut self, x: &[Vec<f64>], progress: f64) -> PlainStep {
        let (acts, pres) = self.forward(x);
        let logits = acts.last().unwrap();
        let n = x.len() as f64;
        let probs: Vec<Vec<f64>> = logits
            .iter()
            .map(|r| {
                let m = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = r.iter().map(|v| (v - m).exp()).collect();
                let s: f64 = e.iter().sum();
                e.iter().map(|v| v / s).collect()
            })
            .collect();
        let k = probs[0].len();
        let ent = probs
            .iter()
            .map(|p| -p.iter().map(|&q| if q > 0.0 { q * q.ln() } else { 0.0 }).sum::<f64>())
            .sum::<f64>()
            / n;
        let pbar: Vec<f64> = (0..k).map(|j| probs.iter().map(|p| p[j]).sum::<f64>() / n).collect();
        let div: f64 = pbar.iter().map(|&q| if q > 0.0 { q * q.ln() } else { 0.0 }).sum();
        let loss = (1.0 - self.gamma) * ent + self.gamma * div;

        // dL/dp, then through the softmax Jacobian diag(p) - p p^T.
        let mut delta: Vec<Vec<f64>> = probs
            .iter()
            .map(|p| {
                let g: Vec<f64> = (0..k)
                    .map(|j| {
                        let d_ent = -(p[j].max(f64::MIN_POSITIVE).ln() + 1.0) / n;
                        let d_div = (pbar[j].max(f64::MIN_POSITIVE).ln() + 1.0) / n;
                        (1.0 - self.gamma) * d_ent + self.gamma * d_div
                    })
                    .collect();
                let pg: f64 = (0..k).map(|j| p[j] * g[j]).sum();
                (0..k).map(|j| p[j] * (g[j] - pg)).collect()
            })
            .collect();

        let last = self.w.len() - 1;
        let eta = self.eta0 * (1.0 + 10.0 * progress).powf(-0.75);
        for l in (0..=last).rev() {
            let input = &acts[l];
            let next_delta: Vec<Vec<f64>> = if l > 0 {
                (0..delta.len())
                    .map(|r| {
                        (0..self.w[l].len())
                            .map(|i| {
                                let s: f64 = (0..delta[r].len()).map(|o| delta[r][o] * self.w[l][i][o]).sum();
                                if pres[l - 1][r][i] > 0.0 { s } else { 0.0 }
                            })
                            .collect()
                    })
                    .collect()
            } else {
                Vec::new()
            };
            if l < last {
                for i in 0..self.w[l].len() {
                    for o in 0..self.b[l].len() {
                        let g: f64 = (0..delta.len()).map(|r| input[r][i] * delta[r][o]).sum();
                        let v = self.momentum * self.vw[l][i][o] + g + self.weight_decay * self.w[l][i][o];
                        self.vw[l][i][o] = v;
                        self.w[l][i][o] -= eta * v;
                    }
                }
                for o in 0..self.b[l].len() {
                    let g: f64 = delta.iter().map(|d| d[o]).sum();
                    let v = self.momentum * self.vb[l][o] + g + self.weight_decay * self.b[l][o];
                    self.vb[l][o] = v;
                    self.b[l][o] -= eta * v;
                }
            }
            delta = next_delta;
        }
        PlainStep { loss, ent, div }
    }

    /// Largest absolute difference from the parameters of `net`.
    pub fn max_param_diff(&self, net: &DenseNet) -> f64 {
        let mut worst: f64 = 0.0;
        for (l, layer) in net.layers().iter().enumerate() {
            for i in 0..layer.in_dim() {
                for o in 0..layer.out_dim() {
                    worst = worst.max((layer.weight[(i, o)] - self.w[l][i][o]).abs());
                }
            }
            for o in 0..layer.out_dim() {
                worst = worst.max((layer.bias[o] - self.b[l][o]).abs());
            }
        }
        worst
    }
}

pub fn rows(m: &DMatrix<f64>, idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&r| m.row(r).iter().copied().collect()).collect()
}

/// Batch order used by the library for `(seed, epoch)`.
pub fn batches(seed: u64, epoch: usize, n: usize, b: usize) -> Vec<Vec<usize>> {
    target_batches(seed, epoch, n, b)
}

/// Points on a circle, evenly spaced.
pub fn ring(center: [f64; 2], radius: f64, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, 2, |i, j| {
        let a = std::f64::consts::TAU * i as f64 / n as f64;
        center[j] + radius * if j == 0 { a.cos() } else { a.sin() }
    })
}
