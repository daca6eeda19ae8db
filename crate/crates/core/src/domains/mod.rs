//! Seeded synthetic domains and CSV ingestion.
//!
//! The toy problem is a three-class blob mixture in the plane. Source and
//! target share class means and covariances; the target translates every
//! class by its own shift vector. Presets are versioned constants
//! ([`PRESET_VERSION`]); the `strong` preset carries the second class far
//! past the first one, out of the source support but nearer the first class
//! than its own source centroid, and nudges the first class towards the
//! second. [`toy_adapt_config`] and [`TOY_HIDDEN`] complete the recipe.

mod csvio;

pub use csvio::{load_csv, save_csv, CsvData};

use nalgebra::{DMatrix, Matrix2, Vector2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::adaptation::AdaptConfig;
use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Bumped whenever a preset constant changes.
pub const PRESET_VERSION: u32 = 2;

pub type Point = [f64; 2];
pub type Cov = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobSpec {
    pub class_means: Vec<Point>,
    pub class_covs: Vec<Cov>,
    pub n_per_class: usize,
    /// Per-class translation applied to the target domain.
    pub shifts: Vec<Point>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// No shift at all: source and target share one distribution.
    Zero,
    Mild,
    Strong,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Preset::Zero),
            "mild" => Ok(Preset::Mild),
            "strong" => Ok(Preset::Strong),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }
}

const TOY_MEANS: [Point; 3] = [[0.0, 0.0], [0.0, 3.0], [3.0, 1.5]];
const TOY_COV: Cov = [[0.25, 0.0], [0.0, 0.25]];
const MILD_SHIFTS: [Point; 3] = [[0.3, 0.3], [0.4, -0.3], [-0.3, 0.3]];
const STRONG_SHIFTS: [Point; 3] = [[0.09, 0.6], [-4.46, -2.36], [-0.3, 0.3]];

/// Hidden widths of the toy classifier.
pub const TOY_HIDDEN: [usize; 2] = [32, 16];
pub const TOY_N_PER_CLASS: usize = 150;

/// Layer widths for a toy network: 2 inputs, [`TOY_HIDDEN`], 3 classes.
pub fn toy_dims() -> Vec<usize> {
    let mut dims = vec![2];
    dims.extend(TOY_HIDDEN);
    dims.push(3);
    dims
}

/// Toy hyperparameters. Everything not listed keeps its default.
pub fn toy_adapt_config(seed: u64) -> AdaptConfig {
    let mut cfg = AdaptConfig {
        epochs_source: 100,
        epochs_target: 60,
        seed,
        ..AdaptConfig::default()
    };
    cfg.schedule.eta0 = 0.05;
    cfg
}

impl BlobSpec {
    pub fn preset(preset: Preset, n_per_class: usize, seed: u64) -> Self {
        let shifts = match preset {
            Preset::Zero => vec![[0.0, 0.0]; 3],
            Preset::Mild => MILD_SHIFTS.to_vec(),
            Preset::Strong => STRONG_SHIFTS.to_vec(),
        };
        Self {
            class_means: TOY_MEANS.to_vec(),
            class_covs: vec![TOY_COV; 3],
            n_per_class,
            shifts,
            seed,
        }
    }

    /// Shifts interpolated linearly from `mild` (scale 0) to `strong` (scale 1).
    pub fn shift_scale(scale: f64, n_per_class: usize, seed: u64) -> Self {
        let mut spec = Self::preset(Preset::Mild, n_per_class, seed);
        spec.shifts = MILD_SHIFTS
            .iter()
            .zip(STRONG_SHIFTS.iter())
            .map(|(m, s)| [m[0] + scale * (s[0] - m[0]), m[1] + scale * (s[1] - m[1])])
            .collect();
        spec
    }

    pub fn num_classes(&self) -> usize {
        self.class_means.len()
    }

    fn validate(&self) -> Result<Vec<Matrix2<f64>>> {
        let k = self.num_classes();
        if k == 0 {
            return Err(Error::InvalidData("blob spec has no classes".into()));
        }
        if self.class_covs.len() != k || self.shifts.len() != k {
            return Err(Error::DimensionMismatch {
                context: "blob spec classes",
                expected: k,
                actual: self.class_covs.len().min(self.shifts.len()),
            });
        }
        if self.n_per_class == 0 {
            return Err(Error::InvalidData("n_per_class must be positive".into()));
        }
        self.class_covs.iter().map(cov_cholesky).collect()
    }

    /// Whether some shifted target class centroid is nearer to a different
    /// source class centroid than to its own.
    pub fn crosses_other_class(&self) -> bool {
        let k = self.num_classes();
        (0..k).any(|c| {
            let t = Vector2::from(self.class_means[c]) + Vector2::from(self.shifts[c]);
            let own = (t - Vector2::from(self.class_means[c])).norm();
            (0..k)
                .filter(|&o| o != c)
                .any(|o| (t - Vector2::from(self.class_means[o])).norm() < own)
        })
    }
}

fn cov_cholesky(c: &Cov) -> Result<Matrix2<f64>> {
    let m = Matrix2::new(c[0][0], c[0][1], c[1][0], c[1][1]);
    if m != m.transpose() {
        return Err(Error::InvalidData("class covariance is not symmetric".into()));
    }
    m.cholesky()
        .map(|ch| ch.l())
        .ok_or_else(|| Error::InvalidData("class covariance is not positive definite".into()))
}

fn draw_blob(
    mean: Vector2<f64>,
    chol: &Matrix2<f64>,
    n: usize,
    rng: &mut rng::Rng,
    out: &mut Vec<f64>,
) {
    for _ in 0..n {
        let e = Vector2::new(
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng),
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng),
        );
        let x = mean + chol * e;
        out.extend_from_slice(&[x[0], x[1]]);
    }
}

/// Source and labelled target sets, class-major, `n_per_class` rows per class.
///
/// Target labels are for evaluation only.
pub fn gen_toy(spec: &BlobSpec) -> Result<(LabeledSet, LabeledSet)> {
    let chols = spec.validate()?;
    let k = spec.num_classes();
    let n = spec.n_per_class;
    let mut rng = rng::stream(spec.seed, Stream::Data);
    let classes: Vec<usize> = (0..k).flat_map(|c| std::iter::repeat_n(c, n)).collect();

    let mut source = Vec::with_capacity(2 * n * k);
    for (mean, chol) in spec.class_means.iter().zip(&chols) {
        draw_blob(Vector2::from(*mean), chol, n, &mut rng, &mut source);
    }
    let mut target = Vec::with_capacity(2 * n * k);
    for ((mean, shift), chol) in spec.class_means.iter().zip(&spec.shifts).zip(&chols) {
        draw_blob(Vector2::from(*mean) + Vector2::from(*shift), chol, n, &mut rng, &mut target);
    }
    let source = LabeledSet::from_indices(DMatrix::from_row_slice(n * k, 2, &source), &classes, k)?;
    let target = LabeledSet::from_indices(DMatrix::from_row_slice(n * k, 2, &target), &classes, k)?;
    Ok((source, target))
}

/// Adds a target-only unknown class to a toy problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenSetSpec {
    pub base: BlobSpec,
    pub n_private: usize,
    pub private_mean: Point,
    pub private_cov: Cov,
}

impl OpenSetSpec {
    /// Private class far from every known class.
    pub fn far_private(base: BlobSpec, n_private: usize) -> Self {
        Self {
            base,
            n_private,
            private_mean: [-4.0, 6.0],
            private_cov: TOY_COV,
        }
    }
}

/// As [`gen_toy`], with `n_private` target rows labelled `K` appended.
///
/// The source keeps `K` label columns; the target gets `K + 1`.
pub fn gen_open_set(spec: &OpenSetSpec) -> Result<(LabeledSet, LabeledSet)> {
    let (source, target) = gen_toy(&spec.base)?;
    if spec.n_private == 0 {
        return Ok((source, target));
    }
    let chol = cov_cholesky(&spec.private_cov)?;
    let k = spec.base.num_classes();
    // Separate stream so the shared part stays identical to the closed-set draw.
    let mut rng = rng::stream(spec.base.seed ^ 0x9e37_79b9_7f4a_7c15, Stream::Data);
    let mut private = Vec::with_capacity(2 * spec.n_private);
    draw_blob(Vector2::from(spec.private_mean), &chol, spec.n_private, &mut rng, &mut private);

    let n_shared = target.len();
    let mut inputs = DMatrix::zeros(n_shared + spec.n_private, 2);
    inputs.rows_mut(0, n_shared).copy_from(target.inputs());
    inputs
        .rows_mut(n_shared, spec.n_private)
        .copy_from(&DMatrix::from_row_slice(spec.n_private, 2, &private));
    let mut classes = target.classes();
    classes.extend(std::iter::repeat_n(k, spec.n_private));
    let target = LabeledSet::from_indices(inputs, &classes, k + 1)?;
    Ok((source, target))
}
