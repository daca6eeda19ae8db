//! Mild shift: both objectives partition the target.
//!
//! `cargo run --release --example toy_mild_shift [seeds]`

use usfan::domains::{toy_adapt_config, BlobSpec, Preset, TOY_HIDDEN, TOY_N_PER_CLASS};
use usfan::pipeline::run_toy;

fn main() -> usfan::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    println!("seed  before  shot-im  u-sfan");
    for seed in 0..seeds {
        let spec = BlobSpec::preset(Preset::Mild, TOY_N_PER_CLASS, seed);
        let r = run_toy(&spec, &TOY_HIDDEN, &toy_adapt_config(seed))?;
        println!(
            "{seed:>4}  {:>6.3}  {:>7.3}  {:>6.3}",
            r.pre_accuracy, r.baseline_accuracy, r.usfan_accuracy
        );
    }
    Ok(())
}
