//! Analytic gradients against central finite differences for every loss.

use nalgebra::{DMatrix, DVector};
use usfan::adaptation::UsfanObjective;
use usfan::netcore::{DenseNet, LogitLoss, Part, SmoothedCrossEntropy};
use usfan::rng::{stream, Stream};
use rand_distr::{Distribution, StandardNormal};

fn main() -> usfan::Result<()> {
    let mut net = DenseNet::seeded(&[2, 8, 3], 7)?;
    let mut rng = stream(7, Stream::Data);
    let x = DMatrix::from_fn(16, 2, |_, _| StandardNormal.sample(&mut rng));
    let labels = DMatrix::from_fn(16, 3, |i, j| if i % 3 == j { 1.0 } else { 0.0 });
    let w = DVector::from_fn(16, |i, _| 0.4 + 0.6 * (i as f64 / 15.0));

    let losses: Vec<(&str, Box<dyn LogitLoss>)> = vec![
        ("cross-entropy", Box::new(SmoothedCrossEntropy { labels: &labels, alpha: 0.1 })),
        ("usfan", Box::new(UsfanObjective { weights: &w, gamma: 0.5 })),
    ];
    for (name, loss) in &losses {
        let (_, grads) = net.loss_and_grad(&x, loss.as_ref(), &[Part::Feature, Part::Head])?;
        let analytic = grads.head.unwrap().weight;
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for idx in 0..analytic.len() {
            let orig = net.layers()[1].weight[idx];
            net.layers_mut()[1].weight[idx] = orig + h;
            let up = loss.value_and_grad(&net.forward(&x)?.logits)?.0;
            net.layers_mut()[1].weight[idx] = orig - h;
            let down = loss.value_and_grad(&net.forward(&x)?.logits)?.0;
            net.layers_mut()[1].weight[idx] = orig;
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((fd - analytic[idx]).abs() / fd.abs().max(analytic[idx].abs()).max(1e-8));
        }
        println!("{name:>14}: worst relative error on head weights {worst:.2e}");
    }
    Ok(())
}
