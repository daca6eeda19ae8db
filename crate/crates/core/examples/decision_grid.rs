//! Decision surfaces of the source, SHOT-IM and U-SFAN models on the strong
//! shift, as `x,y,class,confidence,weight` grids ready for plotting.
//!
//! `cargo run --release --example decision_grid [out_dir]`

use std::path::PathBuf;

use usfan::domains::{save_csv, toy_adapt_config, BlobSpec, CsvData, Preset, TOY_HIDDEN};
use usfan::evaluation::{decision_grid, write_grid_csv, Bounds, Model};
use usfan::pipeline::run_toy;

fn main() -> usfan::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "decision_grid".into()));
    std::fs::create_dir_all(&out).map_err(|e| usfan::Error::InvalidData(e.to_string()))?;

    let cfg = toy_adapt_config(0);
    let r = run_toy(&BlobSpec::preset(Preset::Strong, 150, 0), &TOY_HIDDEN, &cfg)?;
    let bounds = Bounds { x_min: -8.0, x_max: 6.0, y_min: -5.0, y_max: 8.0 };

    for (name, net) in [("source", &r.source_net), ("shot_im", &r.baseline.net), ("u_sfan", &r.usfan.net)] {
        // Weights come from the source posterior; the head is shared by all three.
        let model = Model::Predictive { net, posterior: &r.posterior, cfg: cfg.laplace, seed: 0 };
        let cells = decision_grid(&model, bounds, (140, 130))?;
        write_grid_csv(&out.join(format!("{name}_grid.csv")), &cells)?;
    }
    save_csv(out.join("source.csv"), &CsvData::Labeled(r.source_set.clone()))?;
    save_csv(out.join("target.csv"), &CsvData::Labeled(r.target_set.clone()))?;
    println!(
        "target accuracy: shot-im {:.3}, u-sfan {:.3}; grids in {}",
        r.baseline_accuracy,
        r.usfan_accuracy,
        out.display()
    );
    Ok(())
}
