//! Closed- and open-set metrics, entropy histograms and decision grids.

mod export;

pub use export::{write_grid_csv, write_histogram_csv, write_metrics_csv};

use nalgebra::DMatrix;

use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::laplace::{row_entropies, LaplaceConfig, Posterior};
use crate::netcore::{argmax, softmax_rows, DenseNet};
use crate::rng::{self, Stream};

/// Something that maps inputs to class probabilities.
#[derive(Debug, Clone, Copy)]
pub enum Model<'a> {
    /// Softmax of the trained head.
    Map(&'a DenseNet),
    /// Monte-Carlo predictive mean under a head posterior.
    ///
    /// Each call draws from a fresh `Eval` stream of `seed`, so identical
    /// inputs give identical outputs.
    Predictive {
        net: &'a DenseNet,
        posterior: &'a Posterior,
        cfg: LaplaceConfig,
        seed: u64,
    },
}

impl Model<'_> {
    pub fn net(&self) -> &DenseNet {
        match self {
            Model::Map(net) | Model::Predictive { net, .. } => net,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.net().num_classes()
    }

    pub fn probs(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            Model::Map(net) => softmax_rows(&net.forward(inputs)?.logits),
            Model::Predictive {
                net,
                posterior,
                cfg,
                seed,
            } => {
                let mut rng = rng::stream(*seed, Stream::Eval);
                posterior.predict(net, inputs, cfg, &mut rng)
            }
        }
    }
}

/// Predict the unknown class `K` when predictive entropy exceeds the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnknownRule {
    pub entropy_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub per_class_acc: Vec<f64>,
    /// Mean per-class accuracy over every label class, unknown included.
    pub os: f64,
    /// Mean per-class accuracy over the known classes only.
    pub os_star: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Per-class accuracy with an empty class counted as 0.
fn class_acc(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Metrics derived from a square confusion matrix whose first `known` classes are shared.
pub fn metrics_from_confusion(confusion: Vec<Vec<usize>>, known: usize) -> Result<MetricsReport> {
    let size = confusion.len();
    if size == 0 || known == 0 || known > size || confusion.iter().any(|r| r.len() != size) {
        return Err(Error::InvalidData("confusion matrix must be square with known ≤ size".into()));
    }
    let n: usize = confusion.iter().flatten().sum();
    if n == 0 {
        return Err(Error::InvalidData("confusion matrix is empty".into()));
    }
    let trace: usize = (0..size).map(|i| confusion[i][i]).sum();
    let per_class_acc: Vec<f64> = (0..size)
        .map(|i| class_acc(confusion[i][i], confusion[i].iter().sum()))
        .collect();
    Ok(MetricsReport {
        accuracy: trace as f64 / n as f64,
        os: mean(&per_class_acc),
        os_star: mean(&per_class_acc[..known]),
        per_class_acc,
        confusion,
    })
}

/// Predicted class per row; `K` marks rejection as unknown.
pub fn predict_classes(probs: &DMatrix<f64>, rule: Option<UnknownRule>) -> Vec<usize> {
    let k = probs.ncols();
    let entropies = row_entropies(probs);
    probs
        .row_iter()
        .zip(entropies.iter())
        .map(|(row, &h)| match rule {
            Some(r) if h > r.entropy_threshold => k,
            _ => argmax(row.iter().copied()),
        })
        .collect()
}

/// Scores a model on labelled data.
///
/// Labels may have width `K` (closed set) or `K + 1` (open set, last class
/// unknown). With an unknown rule the confusion matrix always has `K + 1`
/// rows and columns.
pub fn evaluate(model: &Model, data: &LabeledSet, rule: Option<UnknownRule>) -> Result<MetricsReport> {
    if data.is_empty() {
        return Err(Error::InvalidData("evaluation data is empty".into()));
    }
    let k = model.num_classes();
    let width = data.num_classes();
    if width != k && width != k + 1 {
        return Err(Error::DimensionMismatch {
            context: "evaluation labels",
            expected: k,
            actual: width,
        });
    }
    let size = if rule.is_some() { k + 1 } else { width };
    let probs = model.probs(data.inputs())?;
    let predicted = predict_classes(&probs, rule);

    let mut confusion = vec![vec![0usize; size]; size];
    let mut correct = vec![0usize; size];
    let mut totals = vec![0usize; size];
    for (&truth, &pred) in data.classes().iter().zip(&predicted) {
        confusion[truth][pred] += 1;
        totals[truth] += 1;
        if truth == pred {
            correct[truth] += 1;
        }
    }
    let per_class_acc: Vec<f64> = correct.iter().zip(&totals).map(|(&c, &t)| class_acc(c, t)).collect();
    Ok(MetricsReport {
        accuracy: correct.iter().sum::<usize>() as f64 / data.len() as f64,
        os: mean(&per_class_acc),
        os_star: mean(&per_class_acc[..k.min(size)]),
        per_class_acc,
        confusion,
    })
}

/// Linear-interpolated quantile of sample entropies, for calibrating an [`UnknownRule`].
pub fn entropy_threshold(model: &Model, holdout: &DMatrix<f64>, quantile: f64) -> Result<UnknownRule> {
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::OutOfRange(format!("quantile {quantile} not in [0, 1]")));
    }
    if holdout.nrows() == 0 {
        return Err(Error::InvalidData("hold-out set is empty".into()));
    }
    let mut h: Vec<f64> = row_entropies(&model.probs(holdout)?).iter().copied().collect();
    h.sort_by(f64::total_cmp);
    let pos = quantile * (h.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = h[lo] + (pos - lo as f64) * (h[hi] - h[lo]);
    Ok(UnknownRule { entropy_threshold: t })
}

/// Entropy counts split by prediction correctness, on `bins` uniform bins over `[0, ln K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyHistogram {
    pub edges: Vec<f64>,
    pub correct: Vec<usize>,
    pub incorrect: Vec<usize>,
    pub mean_correct: f64,
    pub mean_incorrect: f64,
}

pub fn entropy_histogram(model: &Model, data: &LabeledSet, bins: usize) -> Result<EntropyHistogram> {
    if bins < 1 {
        return Err(Error::OutOfRange("histogram needs at least one bin".into()));
    }
    if data.is_empty() {
        return Err(Error::InvalidData("histogram data is empty".into()));
    }
    let k = model.num_classes();
    let top = (k as f64).ln();
    let edges: Vec<f64> = (0..=bins).map(|i| top * i as f64 / bins as f64).collect();
    let probs = model.probs(data.inputs())?;
    let entropies = row_entropies(&probs);
    let predicted = predict_classes(&probs, None);

    let mut correct = vec![0usize; bins];
    let mut incorrect = vec![0usize; bins];
    let (mut sum_c, mut sum_i) = (0.0, 0.0);
    for ((&truth, &pred), &h) in data.classes().iter().zip(&predicted).zip(entropies.iter()) {
        let bin = if top > 0.0 {
            ((h / top * bins as f64).floor().max(0.0) as usize).min(bins - 1)
        } else {
            0
        };
        if truth == pred {
            correct[bin] += 1;
            sum_c += h;
        } else {
            incorrect[bin] += 1;
            sum_i += h;
        }
    }
    let n_c: usize = correct.iter().sum();
    let n_i: usize = incorrect.iter().sum();
    let avg = |s: f64, n: usize| if n == 0 { f64::NAN } else { s / n as f64 };
    Ok(EntropyHistogram {
        edges,
        mean_correct: avg(sum_c, n_c),
        mean_incorrect: avg(sum_i, n_i),
        correct,
        incorrect,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub x: f64,
    pub y: f64,
    pub class: usize,
    pub confidence: f64,
    pub weight: f64,
}

/// Evaluates a 2-D model at cell centres, row-major with `y` outermost.
pub fn decision_grid(model: &Model, bounds: Bounds, resolution: (usize, usize)) -> Result<Vec<GridCell>> {
    if model.net().input_dim() != 2 {
        return Err(Error::DimensionMismatch {
            context: "decision grid input",
            expected: 2,
            actual: model.net().input_dim(),
        });
    }
    let (nx, ny) = resolution;
    if nx == 0 || ny == 0 {
        return Err(Error::OutOfRange("grid resolution must be positive".into()));
    }
    let dx = (bounds.x_max - bounds.x_min) / nx as f64;
    let dy = (bounds.y_max - bounds.y_min) / ny as f64;
    let mut points = Vec::with_capacity(2 * nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            points.push(bounds.x_min + (ix as f64 + 0.5) * dx);
            points.push(bounds.y_min + (iy as f64 + 0.5) * dy);
        }
    }
    let inputs = DMatrix::from_row_slice(nx * ny, 2, &points);
    let probs = model.probs(&inputs)?;
    let entropies = row_entropies(&probs);
    Ok(probs
        .row_iter()
        .enumerate()
        .map(|(i, row)| {
            let class = argmax(row.iter().copied());
            GridCell {
                x: inputs[(i, 0)],
                y: inputs[(i, 1)],
                class,
                confidence: row[class],
                weight: (-entropies[i]).exp(),
            }
        })
        .collect())
}
