//! Bring-your-own data: write a toy domain to CSV, read it back and run the
//! pipeline from the files, with checkpoint and posterior round trips.
//!
//! `cargo run --release --example csv_pipeline [out_dir]`

use std::path::PathBuf;

use usfan::adaptation::{adapt_target, train_source};
use usfan::domains::{gen_toy, load_csv, save_csv, toy_adapt_config, toy_dims, BlobSpec, CsvData, Preset};
use usfan::laplace::{fit, load_posterior, save_posterior};
use usfan::netcore::{load_checkpoint, save_checkpoint, DenseNet};
use usfan::pipeline::target_accuracy;

fn main() -> usfan::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "csv_pipeline".into()));
    std::fs::create_dir_all(&out).map_err(|e| usfan::Error::InvalidData(e.to_string()))?;

    let (source, target) = gen_toy(&BlobSpec::preset(Preset::Mild, 100, 3))?;
    save_csv(out.join("source.csv"), &CsvData::Labeled(source))?;
    // Target without labels, as it would arrive in practice.
    save_csv(out.join("target.csv"), &CsvData::Unlabeled(target.unlabeled()))?;

    let source = load_csv(out.join("source.csv"), Some(3))?.into_labeled().expect("labelled");
    let unlabeled = match load_csv(out.join("target.csv"), None)? {
        CsvData::Unlabeled(u) => u,
        CsvData::Labeled(l) => l.unlabeled(),
    };

    let cfg = toy_adapt_config(3);
    let (net, _) = train_source(&DenseNet::seeded(&toy_dims(), 3)?, &source, &cfg)?;
    save_checkpoint(&net, out.join("source.ckpt"))?;
    save_posterior(&fit(&net, &source, &cfg.laplace)?, out.join("posterior.json"))?;

    let net = load_checkpoint(out.join("source.ckpt"))?;
    let posterior = load_posterior(out.join("posterior.json"))?;
    let adapted = adapt_target(&net, Some(&posterior), &unlabeled, &cfg, None)?;
    println!(
        "target accuracy before {:.3}, after {:.3}",
        target_accuracy(&net, &target)?,
        target_accuracy(&adapted.net, &target)?
    );
    Ok(())
}
