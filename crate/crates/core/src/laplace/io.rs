//! JSON posterior container.
//!
//! ```json
//! {
//!   "format": "usfan-posterior", "version": 1,
//!   "variant": "full" | "kronecker",
//!   "rows": 17, "classes": 3,
//!   "theta_map": [/* rows * classes, row-major head matrix */],
//!   "precision": [...], "chol_cov": [...],            // full
//!   "factor_u": [...], "factor_v": [...],             // kronecker
//!   "chol_u_inv": [...], "chol_v_inv": [...]
//! }
//! ```
//!
//! Square matrices are stored row-major. Cholesky caches are written as
//! computed at fit time and read back without recomputation.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{FullPosterior, KroneckerPosterior, Posterior, Variant};
use crate::error::{Error, Result};
use crate::netcore::checkpoint_row_major as row_major;

pub const POSTERIOR_FORMAT: &str = "usfan-posterior";
pub const POSTERIOR_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PosteriorRecord {
    format: String,
    version: u32,
    variant: Variant,
    rows: usize,
    classes: usize,
    theta_map: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    precision: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chol_cov: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    factor_u: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    factor_v: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chol_u_inv: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chol_v_inv: Option<Vec<f64>>,
}

fn square(values: Option<Vec<f64>>, order: usize, name: &str) -> std::result::Result<DMatrix<f64>, String> {
    let values = values.ok_or_else(|| format!("missing field {name}"))?;
    if values.len() != order * order {
        return Err(format!("{name} has {} values, expected {}", values.len(), order * order));
    }
    Ok(DMatrix::from_row_slice(order, order, &values))
}

impl Posterior {
    pub fn to_json(&self) -> String {
        let theta = self.theta_map();
        let mut record = PosteriorRecord {
            format: POSTERIOR_FORMAT.into(),
            version: POSTERIOR_VERSION,
            variant: self.variant(),
            rows: self.rows(),
            classes: self.classes(),
            theta_map: row_major(&theta),
            precision: None,
            chol_cov: None,
            factor_u: None,
            factor_v: None,
            chol_u_inv: None,
            chol_v_inv: None,
        };
        match self {
            Posterior::Full(p) => {
                record.precision = Some(row_major(&p.precision));
                record.chol_cov = Some(row_major(&p.chol_cov));
            }
            Posterior::Kronecker(p) => {
                record.factor_u = Some(row_major(&p.factor_u));
                record.factor_v = Some(row_major(&p.factor_v));
                record.chol_u_inv = Some(row_major(&p.chol_u_inv));
                record.chol_v_inv = Some(row_major(&p.chol_v_inv));
            }
        }
        serde_json::to_string_pretty(&record).expect("posterior serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let r: PosteriorRecord = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if r.format != POSTERIOR_FORMAT {
            return Err(format!("not a posterior file (format {:?})", r.format));
        }
        if r.version != POSTERIOR_VERSION {
            return Err(format!("unsupported posterior version {}", r.version));
        }
        if r.theta_map.len() != r.rows * r.classes {
            return Err("theta_map length does not match rows × classes".into());
        }
        let theta = DMatrix::from_row_slice(r.rows, r.classes, &r.theta_map);
        Ok(match r.variant {
            Variant::Full => {
                let order = r.rows * r.classes;
                Posterior::Full(FullPosterior {
                    theta_map: DVector::from_column_slice(theta.as_slice()),
                    rows: r.rows,
                    classes: r.classes,
                    precision: square(r.precision, order, "precision")?,
                    chol_cov: square(r.chol_cov, order, "chol_cov")?,
                })
            }
            Variant::Kronecker => Posterior::Kronecker(KroneckerPosterior {
                theta_map: theta,
                factor_u: square(r.factor_u, r.rows, "factor_u")?,
                factor_v: square(r.factor_v, r.classes, "factor_v")?,
                chol_u_inv: square(r.chol_u_inv, r.rows, "chol_u_inv")?,
                chol_v_inv: square(r.chol_v_inv, r.classes, "chol_v_inv")?,
            }),
        })
    }
}

pub fn save_posterior(posterior: &Posterior, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, posterior.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_posterior(path: impl AsRef<Path>) -> Result<Posterior> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Posterior::from_json(&text).map_err(|m| Error::format(path, m))
}
