use nalgebra::{Cholesky, DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::hessian::{ggn_hessian_full, ggn_hessian_kfac};
use super::{LaplaceConfig, Variant};
use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::netcore::{augment_bias, softmax_rows, DenseNet};
use crate::rng::Rng;

/// Gaussian over `vec(θ)` with a dense precision matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FullPosterior {
    /// Column-major `vec` of the `(d_z + 1) × K` head matrix.
    pub theta_map: DVector<f64>,
    pub rows: usize,
    pub classes: usize,
    pub precision: DMatrix<f64>,
    /// Lower Cholesky factor of the covariance `H⁻¹`.
    pub chol_cov: DMatrix<f64>,
}

/// Matrix-normal posterior with precision `V ⊗ U`.
#[derive(Debug, Clone, PartialEq)]
pub struct KroneckerPosterior {
    pub theta_map: DMatrix<f64>,
    /// Input-side factor, `(d_z + 1) × (d_z + 1)`.
    pub factor_u: DMatrix<f64>,
    /// Output-side factor, `K × K`.
    pub factor_v: DMatrix<f64>,
    pub chol_u_inv: DMatrix<f64>,
    pub chol_v_inv: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Posterior {
    Full(FullPosterior),
    Kronecker(KroneckerPosterior),
}

/// Lower Cholesky factor of `m⁻¹` for a symmetric positive definite `m`.
pub(crate) fn chol_of_inverse(m: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    let inv = Cholesky::new(m.clone())
        .ok_or(Error::NotPositiveDefinite(what))?
        .inverse();
    let sym = (&inv + inv.transpose()) * 0.5;
    Ok(Cholesky::new(sym).ok_or(Error::NotPositiveDefinite(what))?.l())
}

fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)),
    )
}

impl FullPosterior {
    pub fn from_precision(theta_map: &DMatrix<f64>, precision: DMatrix<f64>) -> Result<Self> {
        let (rows, classes) = theta_map.shape();
        if precision.shape() != (rows * classes, rows * classes) {
            return Err(Error::DimensionMismatch {
                context: "posterior precision",
                expected: rows * classes,
                actual: precision.nrows(),
            });
        }
        let chol_cov = chol_of_inverse(&precision, "posterior precision")?;
        Ok(Self {
            theta_map: DVector::from_column_slice(theta_map.as_slice()),
            rows,
            classes,
            precision,
            chol_cov,
        })
    }
}

impl KroneckerPosterior {
    pub fn from_factors(
        theta_map: DMatrix<f64>,
        factor_u: DMatrix<f64>,
        factor_v: DMatrix<f64>,
    ) -> Result<Self> {
        let (rows, classes) = theta_map.shape();
        if factor_u.shape() != (rows, rows) {
            return Err(Error::DimensionMismatch {
                context: "input-side factor",
                expected: rows,
                actual: factor_u.nrows(),
            });
        }
        if factor_v.shape() != (classes, classes) {
            return Err(Error::DimensionMismatch {
                context: "output-side factor",
                expected: classes,
                actual: factor_v.nrows(),
            });
        }
        let chol_u_inv = chol_of_inverse(&factor_u, "input-side factor")?;
        let chol_v_inv = chol_of_inverse(&factor_v, "output-side factor")?;
        Ok(Self {
            theta_map,
            factor_u,
            factor_v,
            chol_u_inv,
            chol_v_inv,
        })
    }
}

/// Fits a last-layer posterior with one forward pass over the source data.
///
/// The curvature is taken at the current head, which is the posterior mean.
pub fn fit(net: &DenseNet, source: &LabeledSet, cfg: &LaplaceConfig) -> Result<Posterior> {
    cfg.validate()?;
    if source.num_classes() != net.num_classes() {
        return Err(Error::DimensionMismatch {
            context: "source classes",
            expected: net.num_classes(),
            actual: source.num_classes(),
        });
    }
    let fwd = net.forward(source.inputs())?;
    let latents = augment_bias(&fwd.latents);
    let probs = softmax_rows(&fwd.logits)?;
    let theta_map = net.head_matrix();
    match cfg.variant {
        Variant::Full => {
            let h = ggn_hessian_full(&latents, &probs, cfg.prior_precision)?;
            Ok(Posterior::Full(FullPosterior::from_precision(&theta_map, h)?))
        }
        Variant::Kronecker => {
            let (u, v) = ggn_hessian_kfac(&latents, &probs, cfg.prior_precision)?;
            Ok(Posterior::Kronecker(KroneckerPosterior::from_factors(theta_map, u, v)?))
        }
    }
}

impl Posterior {
    pub fn variant(&self) -> Variant {
        match self {
            Posterior::Full(_) => Variant::Full,
            Posterior::Kronecker(_) => Variant::Kronecker,
        }
    }

    /// Posterior mean as a `(d_z + 1) × K` head matrix.
    pub fn theta_map(&self) -> DMatrix<f64> {
        match self {
            Posterior::Full(p) => DMatrix::from_column_slice(p.rows, p.classes, p.theta_map.as_slice()),
            Posterior::Kronecker(p) => p.theta_map.clone(),
        }
    }

    /// Rows of the head matrix, `d_z + 1`.
    pub fn rows(&self) -> usize {
        match self {
            Posterior::Full(p) => p.rows,
            Posterior::Kronecker(p) => p.theta_map.nrows(),
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            Posterior::Full(p) => p.classes,
            Posterior::Kronecker(p) => p.theta_map.ncols(),
        }
    }

    /// Covariance of `vec(θ)` as a dense matrix.
    pub fn covariance(&self) -> DMatrix<f64> {
        match self {
            Posterior::Full(p) => &p.chol_cov * p.chol_cov.transpose(),
            Posterior::Kronecker(p) => {
                let u_inv = &p.chol_u_inv * p.chol_u_inv.transpose();
                let v_inv = &p.chol_v_inv * p.chol_v_inv.transpose();
                v_inv.kronecker(&u_inv)
            }
        }
    }

    /// Same mean, covariance multiplied by `scale ≥ 0`. Scale 0 gives a point mass.
    ///
    /// Only the cached Cholesky factors change; the stored precision keeps
    /// describing the fitted posterior.
    pub fn with_covariance_scale(&self, scale: f64) -> Posterior {
        let mut out = self.clone();
        match &mut out {
            Posterior::Full(p) => p.chol_cov *= scale.sqrt(),
            Posterior::Kronecker(p) => {
                let s = scale.sqrt().sqrt();
                p.chol_u_inv *= s;
                p.chol_v_inv *= s;
            }
        }
        out
    }

    /// One head matrix drawn from the posterior.
    pub fn sample_params(&self, rng: &mut Rng) -> DMatrix<f64> {
        match self {
            Posterior::Full(p) => {
                let eps = standard_normal_matrix(p.theta_map.len(), 1, rng);
                let draw = &p.theta_map + &p.chol_cov * eps.column(0);
                DMatrix::from_column_slice(p.rows, p.classes, draw.as_slice())
            }
            Posterior::Kronecker(p) => {
                let (rows, classes) = p.theta_map.shape();
                let eps = standard_normal_matrix(rows, classes, rng);
                &p.theta_map + &p.chol_u_inv * eps * p.chol_v_inv.transpose()
            }
        }
    }

    /// Monte-Carlo predictive mean `(1/M) Σ_j softmax(z θ_j / τ)`.
    ///
    /// `latents` must include the trailing constant-1 column.
    pub fn predictive_mean(
        &self,
        latents: &DMatrix<f64>,
        cfg: &LaplaceConfig,
        rng: &mut Rng,
    ) -> Result<DMatrix<f64>> {
        cfg.validate()?;
        if latents.ncols() != self.rows() {
            return Err(Error::DimensionMismatch {
                context: "predictive latents",
                expected: self.rows(),
                actual: latents.ncols(),
            });
        }
        let mut mean = DMatrix::zeros(latents.nrows(), self.classes());
        for _ in 0..cfg.mc_samples {
            let theta = self.sample_params(rng);
            let logits = latents * theta / cfg.temperature;
            mean += softmax_rows(&logits)?;
        }
        Ok(mean / cfg.mc_samples as f64)
    }

    /// Predictive mean for raw inputs pushed through the network's feature extractor.
    pub fn predict(
        &self,
        net: &DenseNet,
        inputs: &DMatrix<f64>,
        cfg: &LaplaceConfig,
        rng: &mut Rng,
    ) -> Result<DMatrix<f64>> {
        let latents = augment_bias(&net.latents(inputs)?);
        self.predictive_mean(&latents, cfg, rng)
    }
}
