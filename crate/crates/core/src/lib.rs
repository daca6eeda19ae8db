//! Uncertainty-guided source-free domain adaptation.
//!
//! A dense classifier is split into a feature extractor and a linear head.
//! After supervised training on a labelled source domain, a last-layer
//! Laplace posterior over the head turns predictive entropy into a per-sample
//! weight, and the feature extractor is adapted on unlabelled target data by
//! an information-maximization objective whose entropy term uses those
//! weights.
//!
//! Modules follow the pipeline: [`netcore`] (network, losses, gradients,
//! optimizer, checkpoints), [`laplace`] (curvature, posterior, predictive),
//! [`adaptation`] (objectives and the source and target loops),
//! [`domains`] (seeded toy data and CSV input), [`evaluation`] (metrics,
//! histograms, grids), [`pipeline`] (the toy experiment end to end) and
//! [`cli`].

pub mod adaptation;
pub mod cli;
pub mod data;
pub mod domains;
pub mod error;
pub mod evaluation;
pub mod laplace;
pub mod netcore;
pub mod pipeline;
pub mod rng;

pub use data::{LabeledSet, UnlabeledSet};
pub use error::{Error, Result};
