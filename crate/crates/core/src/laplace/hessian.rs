//! Generalized Gauss-Newton curvature of the softmax cross-entropy wrt the head.
//!
//! Head parameters are vectorized column-major from the `(d_z + 1) × K` head
//! matrix, so a sample contributes `Λ ⊗ z zᵀ` with `Λ = diag(p) - p pᵀ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) fn check_prior(prior_precision: f64) -> Result<()> {
    if !(prior_precision.is_finite() && prior_precision > 0.0) {
        return Err(Error::OutOfRange(format!(
            "prior precision {prior_precision} must be positive"
        )));
    }
    Ok(())
}

fn check_rows(latents: &DMatrix<f64>, probs: &DMatrix<f64>) -> Result<()> {
    if latents.nrows() != probs.nrows() {
        return Err(Error::DimensionMismatch {
            context: "hessian batch",
            expected: latents.nrows(),
            actual: probs.nrows(),
        });
    }
    Ok(())
}

/// Output-side curvature `diag(p) - p pᵀ` of one softmax row.
pub fn softmax_curvature(p: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(p) - p * p.transpose()
}

/// Data part of the full GGN, `Σ_i Λ_i ⊗ z_i z_iᵀ`, without any prior.
///
/// `latents` already carry the constant-1 bias column.
pub fn ggn_full_data(latents: &DMatrix<f64>, probs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_rows(latents, probs)?;
    let order = latents.ncols() * probs.ncols();
    let mut h = DMatrix::zeros(order, order);
    for (z, p) in latents.row_iter().zip(probs.row_iter()) {
        let z = z.transpose();
        let lambda = softmax_curvature(&p.transpose());
        h += lambda.kronecker(&(&z * z.transpose()));
    }
    Ok(h)
}

/// Full GGN `Σ_i Λ_i ⊗ z_i z_iᵀ + λ I`.
pub fn ggn_hessian_full(
    latents: &DMatrix<f64>,
    probs: &DMatrix<f64>,
    prior_precision: f64,
) -> Result<DMatrix<f64>> {
    check_prior(prior_precision)?;
    let mut h = ggn_full_data(latents, probs)?;
    for i in 0..h.nrows() {
        h[(i, i)] += prior_precision;
    }
    Ok(h)
}

/// Data parts of the Kronecker factors, `(Σ z zᵀ / √n, Σ Λ / √n)`.
///
/// Each factor takes one `1/√n`, so `V ⊗ U` carries the same total mass as
/// the full sum. Both are zero when there is no data.
pub fn ggn_kfac_data(
    latents: &DMatrix<f64>,
    probs: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_rows(latents, probs)?;
    let (n, d) = latents.shape();
    let k = probs.ncols();
    let mut u = DMatrix::zeros(d, d);
    let mut v = DMatrix::zeros(k, k);
    for (z, p) in latents.row_iter().zip(probs.row_iter()) {
        u += z.transpose() * z;
        v += softmax_curvature(&p.transpose());
    }
    if n > 0 {
        let scale = (n as f64).sqrt();
        u /= scale;
        v /= scale;
    }
    Ok((u, v))
}

/// Kronecker factors `(U, V)` with `V ⊗ U ≈ H`, each carrying `√λ I` of the prior.
pub fn ggn_hessian_kfac(
    latents: &DMatrix<f64>,
    probs: &DMatrix<f64>,
    prior_precision: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_prior(prior_precision)?;
    let (mut u, mut v) = ggn_kfac_data(latents, probs)?;
    let root = prior_precision.sqrt();
    for i in 0..u.nrows() {
        u[(i, i)] += root;
    }
    for i in 0..v.nrows() {
        v[(i, i)] += root;
    }
    Ok((u, v))
}
