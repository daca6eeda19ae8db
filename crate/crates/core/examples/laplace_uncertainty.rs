//! Predictive entropy grows away from the source data under the Laplace
//! posterior, while the MAP softmax stays confident.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use usfan::adaptation::train_source;
use usfan::domains::{gen_toy, toy_adapt_config, toy_dims, BlobSpec, Preset};
use usfan::laplace::{fit, row_entropies, LaplaceConfig, Variant};
use usfan::netcore::{softmax_rows, DenseNet};
use usfan::rng::{stream, Stream};

fn ring(center: [f64; 2], radius: f64, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, 2, |i, j| {
        let a = TAU * i as f64 / n as f64;
        center[j] + radius * if j == 0 { a.cos() } else { a.sin() }
    })
}

fn mean(v: &nalgebra::DVector<f64>) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn main() -> usfan::Result<()> {
    let cfg = toy_adapt_config(0);
    let (source, _) = gen_toy(&BlobSpec::preset(Preset::Mild, 150, 0))?;
    let (net, _) = train_source(&DenseNet::seeded(&toy_dims(), 0)?, &source, &cfg)?;
    let center = [1.0, 1.5];

    println!("radius  map      full     kronecker");
    for radius in [0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
        let x = ring(center, radius, 256);
        let map = mean(&row_entropies(&softmax_rows(&net.forward(&x)?.logits)?));
        let mut line = format!("{radius:>6.1}  {map:.4}");
        for variant in [Variant::Full, Variant::Kronecker] {
            let lc = LaplaceConfig { variant, mc_samples: 100, ..cfg.laplace };
            let post = fit(&net, &source, &lc)?;
            let p = post.predict(&net, &x, &lc, &mut stream(0, Stream::Eval))?;
            line += &format!("   {:.4}", mean(&row_entropies(&p)));
        }
        println!("{line}");
    }
    println!("max entropy ln 3 = {:.4}", 3f64.ln());
    Ok(())
}
