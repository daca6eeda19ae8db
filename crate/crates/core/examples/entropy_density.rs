//! Entropy of correct and incorrect target predictions before adaptation,
//! MAP against the Laplace predictive. Writes both histograms as CSV.
//!
//! `cargo run --release --example entropy_density [out_dir]`

use std::path::PathBuf;

use usfan::adaptation::train_source;
use usfan::domains::{gen_toy, toy_adapt_config, toy_dims, BlobSpec, Preset};
use usfan::evaluation::{entropy_histogram, write_histogram_csv, Model};
use usfan::laplace::fit;
use usfan::netcore::DenseNet;

fn main() -> usfan::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "entropy_density".into()));
    std::fs::create_dir_all(&out).map_err(|e| usfan::Error::InvalidData(e.to_string()))?;

    let cfg = toy_adapt_config(0);
    let (source, target) = gen_toy(&BlobSpec::preset(Preset::Strong, 150, 0))?;
    let (net, _) = train_source(&DenseNet::seeded(&toy_dims(), 0)?, &source, &cfg)?;
    let posterior = fit(&net, &source, &cfg.laplace)?;

    let models = [
        ("map", Model::Map(&net)),
        ("laplace", Model::Predictive { net: &net, posterior: &posterior, cfg: cfg.laplace, seed: 0 }),
    ];
    for (name, model) in models {
        let h = entropy_histogram(&model, &target, 20)?;
        println!(
            "{name:>8}: mean entropy correct {:.4}, incorrect {:.4}",
            h.mean_correct, h.mean_incorrect
        );
        write_histogram_csv(&out.join(format!("{name}_hist.csv")), &h)?;
    }
    println!("histograms in {}", out.display());
    Ok(())
}
