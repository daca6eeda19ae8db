use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use super::config::{EvalMode, RunConfig, RunData};
use super::{Command, ModelArgs, RunArgs};
use crate::adaptation::{adapt_target, train_source, write_run_log, AdaptConfig};
use crate::domains::BlobSpec;
use crate::error::{Error, Result};
use crate::evaluation::{
    decision_grid, entropy_histogram, entropy_threshold, evaluate, write_grid_csv,
    write_histogram_csv, write_metrics_csv, Bounds, Model,
};
use crate::laplace::{fit, load_posterior, save_posterior, Posterior};
use crate::netcore::{load_checkpoint, save_checkpoint, DenseNet};
use crate::pipeline::run_toy;

struct Run {
    cfg: RunConfig,
    dir: PathBuf,
}

impl Run {
    fn open(args: &RunArgs) -> Result<Self> {
        let mut cfg = RunConfig::load(&args.config)?;
        if let Some(dir) = &args.out_dir {
            cfg.output_dir = Some(dir.clone());
        }
        let dir = cfg.run_dir();
        cfg.output_dir = Some(dir.clone());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let resolved = dir.join("config.resolved.toml");
        fs::write(&resolved, cfg.to_toml()).map_err(|e| Error::io(&resolved, e))?;
        Ok(Self { cfg, dir })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn data(&self) -> Result<RunData> {
        self.cfg.load_data()
    }

    fn dims(&self, data: &RunData) -> Vec<usize> {
        let mut dims = vec![data.source.input_dim()];
        dims.extend_from_slice(&self.cfg.hidden);
        dims.push(data.source.num_classes());
        dims
    }
}

fn existing(path: PathBuf, hint: &str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::format(&path, format!("not found; {hint}")))
    }
}

fn load_run_posterior(run: &Run, path: Option<&PathBuf>) -> Result<Posterior> {
    let path = path.cloned().unwrap_or_else(|| run.path("posterior.json"));
    let hint = format!(
        "run `usfan fit-laplace --config {}` first",
        run.dir.join("config.resolved.toml").display()
    );
    load_posterior(existing(path, &hint)?)
}

fn check_compatible(net: &DenseNet, data: &RunData) -> Result<()> {
    if net.input_dim() != data.source.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "checkpoint input width vs data",
            expected: data.source.input_dim(),
            actual: net.input_dim(),
        });
    }
    if net.num_classes() != data.source.num_classes() {
        return Err(Error::DimensionMismatch {
            context: "checkpoint classes vs data",
            expected: data.source.num_classes(),
            actual: net.num_classes(),
        });
    }
    Ok(())
}

pub(super) fn execute(command: Command) -> Result<()> {
    match command {
        Command::TrainSource { run } => train_source_cmd(&Run::open(&run)?),
        Command::FitLaplace { run, checkpoint } => fit_laplace_cmd(&Run::open(&run)?, checkpoint),
        Command::Adapt {
            run,
            checkpoint,
            posterior,
            baseline,
        } => adapt_cmd(&Run::open(&run)?, checkpoint, posterior, baseline),
        Command::Eval { run, model } => eval_cmd(&Run::open(&run)?, &model),
        Command::Grid { run, model } => grid_cmd(&Run::open(&run)?, &model),
        Command::Entropy { run, model } => entropy_cmd(&Run::open(&run)?, &model),
        Command::Sweep { run } => sweep_cmd(&Run::open(&run)?),
    }
}

fn train_source_cmd(run: &Run) -> Result<()> {
    let data = run.data()?;
    let init = DenseNet::seeded(&run.dims(&data), run.cfg.adapt.seed)?;
    let (net, report) = train_source(&init, &data.source, &run.cfg.adapt)?;
    let ckpt = run.path("source.ckpt");
    save_checkpoint(&net, &ckpt)?;
    let metrics = evaluate(&Model::Map(&net), &data.source, None)?;
    write_metrics_csv(&run.path("source_metrics.csv"), &metrics)?;
    info!("source accuracy {:.4}, wrote {}", report.train_accuracy, ckpt.display());
    println!("source_accuracy {}", metrics.accuracy);
    Ok(())
}

fn fit_laplace_cmd(run: &Run, checkpoint: Option<PathBuf>) -> Result<()> {
    let ckpt = checkpoint.unwrap_or_else(|| run.path("source.ckpt"));
    let net = load_checkpoint(existing(ckpt, "run `usfan train-source` first")?)?;
    let data = run.data()?;
    check_compatible(&net, &data)?;
    let posterior = fit(&net, &data.source, &run.cfg.adapt.laplace)?;
    let out = run.path("posterior.json");
    save_posterior(&posterior, &out)?;
    info!("wrote {}", out.display());
    Ok(())
}

fn adapt_cmd(
    run: &Run,
    checkpoint: Option<PathBuf>,
    posterior: Option<PathBuf>,
    baseline: bool,
) -> Result<()> {
    let ckpt = checkpoint.unwrap_or_else(|| run.path("source.ckpt"));
    let net = load_checkpoint(existing(ckpt, "run `usfan train-source` first")?)?;
    let data = run.data()?;
    check_compatible(&net, &data)?;
    let cfg = AdaptConfig {
        baseline_mode: baseline || run.cfg.adapt.baseline_mode,
        ..run.cfg.adapt.clone()
    };
    let posterior = if cfg.baseline_mode {
        None
    } else {
        Some(load_run_posterior(run, posterior.as_ref()).map_err(|e| match e {
            Error::Format { path, message } => Error::Format {
                path,
                message: format!("{message}, or adapt with --baseline"),
            },
            other => other,
        })?)
    };
    let outcome = adapt_target(&net, posterior.as_ref(), &data.target_inputs, &cfg, data.target.as_ref())?;
    save_checkpoint(&outcome.net, run.path("adapted.ckpt"))?;
    let mode = if cfg.baseline_mode { "shot-im" } else { "u-sfan" };
    write_run_log(&run.path("adapt_log.csv"), mode, &outcome.log)?;
    if let Some(acc) = outcome.log.last().and_then(|r| r.target_acc) {
        println!("mode {mode} target_accuracy {acc}");
    }
    Ok(())
}

/// Loads the network and, in predictive mode, the posterior for evaluation commands.
fn load_model(run: &Run, args: &ModelArgs) -> Result<(DenseNet, Option<Posterior>)> {
    let ckpt = args.checkpoint.clone().unwrap_or_else(|| run.path("adapted.ckpt"));
    let net = load_checkpoint(existing(ckpt, "run `usfan adapt` or pass --checkpoint")?)?;
    let mode = args.mode.unwrap_or(run.cfg.eval.mode);
    let posterior = match mode {
        EvalMode::Map => None,
        EvalMode::Predictive => Some(load_run_posterior(run, args.posterior.as_ref())?),
    };
    Ok((net, posterior))
}

fn model<'a>(run: &Run, net: &'a DenseNet, posterior: &'a Option<Posterior>) -> Model<'a> {
    match posterior {
        None => Model::Map(net),
        Some(posterior) => Model::Predictive {
            net,
            posterior,
            cfg: run.cfg.adapt.laplace,
            seed: run.cfg.adapt.seed,
        },
    }
}

fn labelled_target(data: &RunData) -> Result<&crate::LabeledSet> {
    data.target
        .as_ref()
        .ok_or_else(|| Error::InvalidData("this command needs a labelled target".into()))
}

fn eval_cmd(run: &Run, args: &ModelArgs) -> Result<()> {
    let (net, posterior) = load_model(run, args)?;
    let data = run.data()?;
    check_compatible(&net, &data)?;
    let m = model(run, &net, &posterior);
    let target = labelled_target(&data)?;
    let rule = if run.cfg.data.open_set {
        let holdout = data.holdout.as_ref().unwrap_or(&data.source);
        let rule = entropy_threshold(&m, holdout.inputs(), run.cfg.eval.unknown_quantile)?;
        info!("unknown-class entropy threshold {}", rule.entropy_threshold);
        Some(rule)
    } else {
        None
    };
    let report = evaluate(&m, target, rule)?;
    write_metrics_csv(&run.path("eval_metrics.csv"), &report)?;
    println!(
        "accuracy {} os {} os_star {}",
        report.accuracy, report.os, report.os_star
    );
    Ok(())
}

fn grid_cmd(run: &Run, args: &ModelArgs) -> Result<()> {
    let (net, posterior) = load_model(run, args)?;
    let [x_min, x_max, y_min, y_max] = run.cfg.eval.grid_bounds;
    let [nx, ny] = run.cfg.eval.grid_resolution;
    let cells = decision_grid(
        &model(run, &net, &posterior),
        Bounds { x_min, x_max, y_min, y_max },
        (nx, ny),
    )?;
    write_grid_csv(&run.path("grid.csv"), &cells)
}

fn entropy_cmd(run: &Run, args: &ModelArgs) -> Result<()> {
    let (net, posterior) = load_model(run, args)?;
    let data = run.data()?;
    check_compatible(&net, &data)?;
    let hist = entropy_histogram(
        &model(run, &net, &posterior),
        labelled_target(&data)?,
        run.cfg.eval.histogram_bins,
    )?;
    write_histogram_csv(&run.path("entropy_hist.csv"), &hist)?;
    println!(
        "mean_entropy_correct {} mean_entropy_incorrect {}",
        hist.mean_correct, hist.mean_incorrect
    );
    Ok(())
}

fn sweep_cmd(run: &Run) -> Result<()> {
    if run.cfg.uses_csv() {
        return Err(Error::Config("sweep needs toy data, not CSV files".into()));
    }
    let sweep = &run.cfg.sweep;
    if sweep.scales.is_empty() || sweep.seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one scale and one seed".into()));
    }
    let mut rows = Vec::new();
    for &scale in &sweep.scales {
        for &seed in &sweep.seeds {
            let spec = BlobSpec::shift_scale(scale, run.cfg.data.n_per_class, seed);
            let cfg = AdaptConfig { seed, ..run.cfg.adapt.clone() };
            let r = run_toy(&spec, &run.cfg.hidden, &cfg)?;
            info!(
                "scale {scale} seed {seed}: shot-im {:.3} u-sfan {:.3}",
                r.baseline_accuracy, r.usfan_accuracy
            );
            rows.push([
                scale.to_string(),
                seed.to_string(),
                r.source_report.train_accuracy.to_string(),
                r.pre_accuracy.to_string(),
                r.baseline_accuracy.to_string(),
                r.usfan_accuracy.to_string(),
            ]);
        }
    }
    write_sweep(&run.path("sweep.csv"), &rows)?;
    println!("shift_scale shot_im_mean u_sfan_mean");
    for chunk in rows.chunks(sweep.seeds.len()) {
        let mean = |col: usize| {
            chunk.iter().map(|r| r[col].parse::<f64>().unwrap()).sum::<f64>() / chunk.len() as f64
        };
        println!("{} {:.4} {:.4}", chunk[0][0], mean(4), mean(5));
    }
    Ok(())
}

/// `shift_scale,seed,source_accuracy,pre_accuracy,shot_im_accuracy,usfan_accuracy`.
fn write_sweep(path: &Path, rows: &[[String; 6]]) -> Result<()> {
    let err = |e: csv::Error| Error::format(path, e);
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record([
        "shift_scale",
        "seed",
        "source_accuracy",
        "pre_accuracy",
        "shot_im_accuracy",
        "usfan_accuracy",
    ])
    .map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
