//! Last-layer Laplace posterior over the head parameters.
//!
//! After source training the head is treated as Gaussian around its trained
//! value, with precision given by the GGN curvature of the source loss plus an
//! isotropic prior. Predictions average tempered softmax outputs over
//! parameter draws; the entropy of that average yields per-sample weights.

mod hessian;
mod io;
mod posterior;

pub use hessian::{
    ggn_full_data, ggn_hessian_full, ggn_hessian_kfac, ggn_kfac_data, softmax_curvature,
};
pub use io::{load_posterior, save_posterior, POSTERIOR_FORMAT, POSTERIOR_VERSION};
pub use posterior::{fit, FullPosterior, KroneckerPosterior, Posterior};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Kronecker,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaplaceConfig {
    /// Prior precision λ.
    pub prior_precision: f64,
    /// Logit temperature τ in (0, 1].
    pub temperature: f64,
    /// Monte-Carlo samples M per predictive estimate.
    pub mc_samples: usize,
    pub variant: Variant,
}

impl Default for LaplaceConfig {
    fn default() -> Self {
        Self {
            prior_precision: 5e-4,
            temperature: 0.4,
            mc_samples: 10,
            variant: Variant::Kronecker,
        }
    }
}

impl LaplaceConfig {
    pub fn validate(&self) -> Result<()> {
        hessian::check_prior(self.prior_precision)?;
        if !(self.temperature > 0.0 && self.temperature <= 1.0) {
            return Err(Error::OutOfRange(format!(
                "temperature {} not in (0, 1]",
                self.temperature
            )));
        }
        if self.mc_samples < 1 {
            return Err(Error::OutOfRange("mc_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// `x ln x` with the convention `0 ln 0 = 0`.
pub(crate) fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Shannon entropy in nats of one probability vector.
pub fn entropy(p: impl IntoIterator<Item = f64>) -> f64 {
    -p.into_iter().map(xlogx).sum::<f64>()
}

/// Row entropies of a probability matrix, without validation.
pub fn row_entropies(probs: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        probs.nrows(),
        probs.row_iter().map(|r| entropy(r.iter().copied())),
    )
}

pub(crate) fn check_probability_rows(probs: &DMatrix<f64>) -> Result<()> {
    for (i, row) in probs.row_iter().enumerate() {
        if row.iter().any(|&v| !(v.is_finite() && v >= 0.0)) || (row.sum() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidData(format!("row {i} is not a probability vector")));
        }
    }
    Ok(())
}

/// Per-sample weights `exp(-H(p̄_i))`, each in `[1/K, 1]`.
pub fn entropy_weights(probs: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_probability_rows(probs)?;
    Ok(row_entropies(probs).map(|h| (-h).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weight_examples() {
        let probs = DMatrix::from_row_slice(
            3,
            3,
            &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0, 0.0, 0.75, 0.25, 0.0],
        );
        let w = entropy_weights(&probs).unwrap();
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(w[1], 1.0);
        let h: f64 = -0.75 * 0.75f64.ln() - 0.25 * 0.25f64.ln();
        assert!((h - 0.5623).abs() < 1e-4);
        assert!((w[2] - (-h).exp()).abs() < 1e-15);
        assert!((w[2] - 0.5699).abs() < 1e-4);
    }

    #[test]
    fn weights_reject_non_probabilities() {
        assert!(entropy_weights(&DMatrix::from_row_slice(1, 2, &[0.7, 0.7])).is_err());
        assert!(entropy_weights(&DMatrix::from_row_slice(1, 2, &[1.5, -0.5])).is_err());
        assert!(entropy_weights(&DMatrix::from_row_slice(1, 2, &[f64::NAN, 1.0])).is_err());
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = LaplaceConfig::default();
        assert_eq!(cfg.prior_precision, 5e-4);
        assert_eq!(cfg.temperature, 0.4);
        assert_eq!(cfg.mc_samples, 10);
        cfg.validate().unwrap();
        assert!(LaplaceConfig { temperature: 0.0, ..cfg }.validate().is_err());
        assert!(LaplaceConfig { temperature: 1.2, ..cfg }.validate().is_err());
        assert!(LaplaceConfig { mc_samples: 0, ..cfg }.validate().is_err());
        assert!(LaplaceConfig { prior_precision: 0.0, ..cfg }.validate().is_err());
    }

    proptest! {
        #[test]
        fn weights_are_bounded(raw in proptest::collection::vec(0.0f64..1.0, 4)) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let row: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let probs = DMatrix::from_row_slice(1, 4, &row);
            let w = entropy_weights(&probs).unwrap()[0];
            prop_assert!((0.25 - 1e-12..=1.0).contains(&w));
        }
    }
}
