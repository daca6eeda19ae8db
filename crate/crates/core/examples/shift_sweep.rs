//! Target accuracy as the shift grows from the mild to the strong preset.

use usfan::domains::{toy_adapt_config, BlobSpec, TOY_HIDDEN, TOY_N_PER_CLASS};
use usfan::pipeline::run_toy;

fn main() -> usfan::Result<()> {
    let seeds = [0u64, 1, 2];
    println!("scale  shot-im  u-sfan");
    for step in 0..=8 {
        let scale = step as f64 / 8.0;
        let (mut base, mut ug) = (0.0, 0.0);
        for &seed in &seeds {
            let spec = BlobSpec::shift_scale(scale, TOY_N_PER_CLASS, seed);
            let r = run_toy(&spec, &TOY_HIDDEN, &toy_adapt_config(seed))?;
            base += r.baseline_accuracy;
            ug += r.usfan_accuracy;
        }
        let n = seeds.len() as f64;
        println!("{scale:>5.3}  {:>7.3}  {:>6.3}", base / n, ug / n);
    }
    Ok(())
}
