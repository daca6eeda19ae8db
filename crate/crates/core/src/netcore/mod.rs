//! Dense feed-forward network split into a feature extractor and a linear head.
//!
//! A [`DenseNet`] is an ordered chain of affine layers. Every layer before
//! `split_index` belongs to the feature extractor; the single layer at
//! `split_index` is the head mapping latents to logits. Either part can be
//! frozen, after which requesting or applying gradients for it fails.
//!
//! Weights are stored `in × out` so a batch propagates as `X · W + 1 bᵀ`.

mod checkpoint;
mod grad;
mod loss;
mod optim;

pub(crate) use checkpoint::row_major as checkpoint_row_major;
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use grad::{backward, Gradients, LayerGrad, LogitLoss};
pub use loss::{label_smoothed_ce, log_softmax_rows, softmax, softmax_rows, SmoothedCrossEntropy};
pub use optim::{Sgd, SgdSchedule};

use nalgebra::{DMatrix, RowDVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One affine map followed by an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DMatrix<f64>,
    pub bias: RowDVector<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weight: DMatrix<f64>, bias: RowDVector<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.ncols() {
            return Err(Error::DimensionMismatch {
                context: "layer bias",
                expected: weight.ncols(),
                actual: bias.len(),
            });
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.ncols()
    }

    fn affine(&self, input: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = input * &self.weight;
        for mut row in out.row_iter_mut() {
            row += &self.bias;
        }
        out
    }
}

/// The two independently freezable halves of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Part {
    /// Feature extractor g with parameters β.
    Feature,
    /// Hypothesis head h with parameters θ.
    Head,
}

impl Part {
    pub fn name(self) -> &'static str {
        match self {
            Part::Feature => "feature",
            Part::Head => "head",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
    split_index: usize,
    frozen_feature: bool,
    frozen_head: bool,
}

/// Latents entering the head and the logits it produces.
#[derive(Debug, Clone)]
pub struct Forward {
    pub latents: DMatrix<f64>,
    pub logits: DMatrix<f64>,
}

/// Cached intermediate values of a forward pass, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `inputs[l]` is the input to layer `l`; the last entry holds the logits.
    pub(crate) inputs: Vec<DMatrix<f64>>,
    pub(crate) pre: Vec<DMatrix<f64>>,
}

impl ForwardTrace {
    pub fn logits(&self) -> &DMatrix<f64> {
        self.inputs.last().expect("trace always holds logits")
    }

    pub fn latents(&self) -> &DMatrix<f64> {
        &self.inputs[self.inputs.len() - 2]
    }

    /// Affine outputs of every layer, before activation.
    pub fn pre_activations(&self) -> &[DMatrix<f64>] {
        &self.pre
    }
}

impl DenseNet {
    /// Wraps a layer chain. The head is the layer at `split_index`, which has
    /// to be the final, identity-activated layer.
    pub fn new(layers: Vec<Layer>, split_index: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidData("network has no layers".into()));
        }
        if split_index + 1 != layers.len() {
            return Err(Error::InvalidData(format!(
                "split index {split_index} must point at the final layer ({})",
                layers.len() - 1
            )));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::DimensionMismatch {
                    context: "layer chain",
                    expected: pair[0].out_dim(),
                    actual: pair[1].in_dim(),
                });
            }
        }
        if layers[split_index].activation != Activation::Identity {
            return Err(Error::InvalidData("head layer must use identity activation".into()));
        }
        Ok(Self {
            layers,
            split_index,
            frozen_feature: false,
            frozen_head: false,
        })
    }

    /// ReLU network with the given layer widths, He-initialized from `seed`.
    ///
    /// `dims = [2, 16, 3]` gives one hidden ReLU layer of width 16 and a head
    /// from 16 latents to 3 logits. Biases start at zero.
    pub fn seeded(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidData(format!("invalid layer widths {dims:?}")));
        }
        let mut rng = rng::stream(seed, Stream::Init);
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let scale = (2.0 / w[0] as f64).sqrt();
                let weight = DMatrix::from_fn(w[0], w[1], |_, _| {
                    scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                });
                let activation = if l == last {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                Layer::new(weight, RowDVector::zeros(w[1]), activation)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers, last)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access for tests and tooling. Bypasses the frozen flags.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn split_index(&self) -> usize {
        self.split_index
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.head().in_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.head().out_dim()
    }

    pub fn head(&self) -> &Layer {
        &self.layers[self.split_index]
    }

    pub fn feature_layers(&self) -> &[Layer] {
        &self.layers[..self.split_index]
    }

    pub fn freeze(&mut self, part: Part) {
        self.set_frozen(part, true);
    }

    pub fn unfreeze(&mut self, part: Part) {
        self.set_frozen(part, false);
    }

    fn set_frozen(&mut self, part: Part, value: bool) {
        match part {
            Part::Feature => self.frozen_feature = value,
            Part::Head => self.frozen_head = value,
        }
    }

    pub fn is_frozen(&self, part: Part) -> bool {
        match part {
            Part::Feature => self.frozen_feature,
            Part::Head => self.frozen_head,
        }
    }

    /// Head parameters as a `(d_z + 1) × K` matrix: weights on top, bias in the last row.
    pub fn head_matrix(&self) -> DMatrix<f64> {
        let head = self.head();
        let d = head.in_dim();
        let mut theta = DMatrix::zeros(d + 1, head.out_dim());
        theta.rows_mut(0, d).copy_from(&head.weight);
        theta.row_mut(d).copy_from(&head.bias);
        theta
    }

    fn check_input(&self, batch: &DMatrix<f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.input_dim(),
                actual: batch.ncols(),
            });
        }
        Ok(())
    }

    /// Latents `z = g(x)` only.
    pub fn latents(&self, batch: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_input(batch)?;
        let mut act = batch.clone();
        for layer in self.feature_layers() {
            let activation = layer.activation;
            act = layer.affine(&act).map(|v| activation.apply(v));
        }
        Ok(act)
    }

    pub fn forward(&self, batch: &DMatrix<f64>) -> Result<Forward> {
        let latents = self.latents(batch)?;
        let logits = self.head().affine(&latents);
        Ok(Forward { latents, logits })
    }

    /// Forward pass keeping every intermediate needed for backpropagation.
    pub fn forward_trace(&self, batch: &DMatrix<f64>) -> Result<ForwardTrace> {
        self.check_input(batch)?;
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        inputs.push(batch.clone());
        for layer in &self.layers {
            let z = layer.affine(inputs.last().expect("non-empty"));
            let activation = layer.activation;
            inputs.push(z.map(|v| activation.apply(v)));
            pre.push(z);
        }
        Ok(ForwardTrace { inputs, pre })
    }

    /// Bit pattern hash of one part's parameters.
    pub fn fingerprint(&self, part: Part) -> u64 {
        use std::hash::{DefaultHasher, Hash, Hasher};
        let mut hasher = DefaultHasher::new();
        let layers = match part {
            Part::Feature => self.feature_layers(),
            Part::Head => std::slice::from_ref(self.head()),
        };
        for layer in layers {
            for v in layer.weight.iter().chain(layer.bias.iter()) {
                v.to_bits().hash(&mut hasher);
            }
        }
        hasher.finish()
    }
}

/// Appends a constant-1 column so the head bias becomes an ordinary weight row.
pub fn augment_bias(latents: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = latents.shape();
    let mut out = DMatrix::from_element(n, d + 1, 1.0);
    out.columns_mut(0, d).copy_from(latents);
    out
}

/// First index of the row maximum; ties resolve to the lowest index.
pub fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in row.into_iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}
