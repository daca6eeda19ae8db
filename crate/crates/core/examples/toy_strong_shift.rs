//! Strong shift: SHOT-IM swaps two classes, U-SFAN keeps them apart.
//!
//! `cargo run --release --example toy_strong_shift [seeds]`

use std::time::Instant;

use usfan::domains::{toy_adapt_config, BlobSpec, Preset, TOY_HIDDEN, TOY_N_PER_CLASS};
use usfan::pipeline::run_toy;

fn main() -> usfan::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    println!("seed  source  before  shot-im  u-sfan  seconds");
    for seed in 0..seeds {
        let start = Instant::now();
        let spec = BlobSpec::preset(Preset::Strong, TOY_N_PER_CLASS, seed);
        let r = run_toy(&spec, &TOY_HIDDEN, &toy_adapt_config(seed))?;
        println!(
            "{seed:>4}  {:>6.3}  {:>6.3}  {:>7.3}  {:>6.3}  {:>7.2}",
            r.source_report.train_accuracy,
            r.pre_accuracy,
            r.baseline_accuracy,
            r.usfan_accuracy,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
