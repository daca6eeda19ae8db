//! Information-maximization losses on softmax outputs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::laplace::{row_entropies, xlogx};
use crate::netcore::{log_softmax_rows, LogitLoss};

/// Mean per-sample entropy of the batch predictions.
pub fn loss_ent(probs: &DMatrix<f64>) -> f64 {
    row_entropies(probs).mean()
}

/// Batch-mean prediction `p̂`.
pub fn mean_prediction(probs: &DMatrix<f64>) -> DVector<f64> {
    probs.row_mean().transpose()
}

/// Diversity term `Σ_k p̂_k ln p̂_k`, equal to `KL(p̂ ‖ uniform) - ln K`.
pub fn loss_div(probs: &DMatrix<f64>) -> f64 {
    mean_prediction(probs).iter().copied().map(xlogx).sum()
}

/// Entropy loss with per-sample weights, `mean_i w_i H(p_i)`.
pub fn loss_ent_ug(probs: &DMatrix<f64>, weights: &DVector<f64>) -> Result<f64> {
    check_weights(probs.nrows(), weights)?;
    let h = row_entropies(probs);
    Ok(h.component_mul(weights).sum() / probs.nrows() as f64)
}

/// `(1 - γ) L_ent^ug + γ L_div`.
pub fn usfan_loss(probs: &DMatrix<f64>, weights: &DVector<f64>, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(combine(loss_ent_ug(probs, weights)?, loss_div(probs), gamma))
}

fn combine(ent: f64, div: f64, gamma: f64) -> f64 {
    (1.0 - gamma) * ent + gamma * div
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::OutOfRange(format!("gamma {gamma} not in [0, 1]")));
    }
    Ok(())
}

fn check_weights(rows: usize, weights: &DVector<f64>) -> Result<()> {
    if weights.len() != rows {
        return Err(Error::DimensionMismatch {
            context: "sample weights",
            expected: rows,
            actual: weights.len(),
        });
    }
    Ok(())
}

/// Weighted IM objective as a function of the logits.
///
/// Weights are constants here: no gradient flows back through them.
#[derive(Debug, Clone, Copy)]
pub struct UsfanObjective<'a> {
    pub weights: &'a DVector<f64>,
    pub gamma: f64,
}

impl LogitLoss for UsfanObjective<'_> {
    fn value_and_grad(&self, logits: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        check_gamma(self.gamma)?;
        check_weights(logits.nrows(), self.weights)?;
        let b = logits.nrows() as f64;
        let log_p = log_softmax_rows(logits)?;
        let p = log_p.map(f64::exp);
        let h = DVector::from_iterator(
            p.nrows(),
            p.row_iter()
                .zip(log_p.row_iter())
                .map(|(pr, lr)| -pr.dot(&lr)),
        );
        let p_hat = mean_prediction(&p);
        let log_p_hat = p_hat.map(|v| v.max(f64::MIN_POSITIVE).ln());

        let ent = h.component_mul(self.weights).sum() / b;
        let div: f64 = p_hat.iter().copied().map(xlogx).sum();
        let value = combine(ent, div, self.gamma);

        // dH_i/da_ij = -p_ij (ln p_ij + H_i)
        // dL_div/da_ij = p_ij (ln p̂_j - Σ_k p_ik ln p̂_k) / b
        let mut grad = DMatrix::zeros(p.nrows(), p.ncols());
        for i in 0..p.nrows() {
            let cross: f64 = (0..p.ncols()).map(|k| p[(i, k)] * log_p_hat[k]).sum();
            for j in 0..p.ncols() {
                let pij = p[(i, j)];
                let d_ent = -pij * (log_p[(i, j)] + h[i]) * self.weights[i] / b;
                let d_div = pij * (log_p_hat[j] - cross) / b;
                grad[(i, j)] = (1.0 - self.gamma) * d_ent + self.gamma * d_div;
            }
        }
        Ok((value, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn entropy_loss_examples() {
        let one_hot = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(loss_ent(&one_hot), 0.0);
        let uniform = DMatrix::from_element(4, 3, 1.0 / 3.0);
        assert!((loss_ent(&uniform) - 3f64.ln()).abs() < 1e-15);
        let mixed = DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.5, 0.5]);
        let h1 = -0.75 * 0.75f64.ln() - 0.25 * 0.25f64.ln();
        assert!((loss_ent(&mixed) - (h1 + LN2) / 2.0).abs() < 1e-15);
        assert!((loss_ent(&mixed) - 0.6277).abs() < 1e-4);
    }

    #[test]
    fn diversity_loss_examples() {
        let uniform = DMatrix::from_element(2, 3, 1.0 / 3.0);
        assert!((loss_div(&uniform) + 3f64.ln()).abs() < 1e-15);
        let same = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(loss_div(&same), 0.0);
        let split = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!((loss_div(&split) + LN2).abs() < 1e-15);
    }

    #[test]
    fn weighted_entropy_examples() {
        let probs = DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.5, 0.5]);
        let ones = DVector::from_element(2, 1.0);
        assert!((loss_ent_ug(&probs, &ones).unwrap() - loss_ent(&probs)).abs() < 1e-15);
        assert_eq!(loss_ent_ug(&probs, &DVector::zeros(2)).unwrap(), 0.0);
        let single = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
        let w = DVector::from_element(1, 0.5);
        assert!((loss_ent_ug(&single, &w).unwrap() - 0.5 * LN2).abs() < 1e-15);
        assert!((0.5 * LN2 - 0.3466).abs() < 1e-4);
        assert!(loss_ent_ug(&probs, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn usfan_loss_mixing() {
        let probs = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.3, 0.7]);
        let w = DVector::from_vec(vec![0.8, 0.6]);
        let ent = loss_ent_ug(&probs, &w).unwrap();
        let div = loss_div(&probs);
        assert_eq!(usfan_loss(&probs, &w, 0.0).unwrap(), ent);
        assert_eq!(usfan_loss(&probs, &w, 1.0).unwrap(), div);
        assert!((combine(0.6, -0.2, 0.5) - 0.2).abs() < 1e-15);
        assert!(usfan_loss(&probs, &w, 1.5).is_err());
        assert!(usfan_loss(&probs, &w, -0.1).is_err());
    }

    #[test]
    fn objective_value_matches_probability_form() {
        let logits = DMatrix::from_row_slice(3, 3, &[0.2, -1.0, 2.0, 1.5, 0.3, 0.1, -0.4, 0.0, 0.9]);
        let w = DVector::from_vec(vec![0.9, 0.4, 0.7]);
        let p = crate::netcore::softmax_rows(&logits).unwrap();
        let (value, _) = UsfanObjective { weights: &w, gamma: 0.3 }.value_and_grad(&logits).unwrap();
        assert!((value - usfan_loss(&p, &w, 0.3).unwrap()).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn usfan_loss_is_bounded(vals in proptest::collection::vec(-8.0f64..8.0, 15), gamma in 0.0f64..=1.0) {
            let logits = DMatrix::from_row_slice(5, 3, &vals);
            let p = crate::netcore::softmax_rows(&logits).unwrap();
            let w = DVector::from_element(5, 1.0);
            let v = usfan_loss(&p, &w, gamma).unwrap();
            let ln_k = 3f64.ln();
            prop_assert!(v >= -gamma * ln_k - 1e-12);
            prop_assert!(v <= (1.0 - gamma) * ln_k + 1e-12);
        }
    }
}
