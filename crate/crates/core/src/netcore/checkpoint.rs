//! JSON network checkpoints.
//!
//! Layout (version 1):
//!
//! ```json
//! {
//!   "format": "usfan-checkpoint",
//!   "version": 1,
//!   "split_index": 1,
//!   "frozen_feature": false,
//!   "frozen_head": false,
//!   "layers": [
//!     { "in_dim": 2, "out_dim": 16, "activation": "relu",
//!       "weight": [/* in_dim * out_dim values, row-major */],
//!       "bias": [/* out_dim values */] }
//!   ]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so save then load is bit-exact.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, RowDVector};
use serde::{Deserialize, Serialize};

use super::{Activation, DenseNet, Layer};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "usfan-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointRecord {
    format: String,
    version: u32,
    split_index: usize,
    frozen_feature: bool,
    frozen_head: bool,
    layers: Vec<LayerRecord>,
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl DenseNet {
    pub fn to_json(&self) -> String {
        let record = CheckpointRecord {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            split_index: self.split_index,
            frozen_feature: self.frozen_feature,
            frozen_head: self.frozen_head,
            layers: self
                .layers
                .iter()
                .map(|l| LayerRecord {
                    in_dim: l.in_dim(),
                    out_dim: l.out_dim(),
                    activation: l.activation,
                    weight: row_major(&l.weight),
                    bias: l.bias.iter().copied().collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&record).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let record: CheckpointRecord = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if record.format != CHECKPOINT_FORMAT {
            return Err(format!("not a network checkpoint (format {:?})", record.format));
        }
        if record.version != CHECKPOINT_VERSION {
            return Err(format!("unsupported checkpoint version {}", record.version));
        }
        let layers = record
            .layers
            .into_iter()
            .map(|l| {
                if l.weight.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                    return Err("layer array length does not match its shape".to_string());
                }
                let weight = DMatrix::from_row_slice(l.in_dim, l.out_dim, &l.weight);
                Layer::new(weight, RowDVector::from_vec(l.bias), l.activation).map_err(|e| e.to_string())
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut net = DenseNet::new(layers, record.split_index).map_err(|e| e.to_string())?;
        net.frozen_feature = record.frozen_feature;
        net.frozen_head = record.frozen_head;
        Ok(net)
    }
}

pub fn save_checkpoint(net: &DenseNet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, net.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<DenseNet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DenseNet::from_json(&text).map_err(|m| Error::format(path, m))
}
