//! Audio-visual cross-modal retrieval with a dual-branch variational
//! autoencoder.
//!
//! Two modality encoders project paired audio and visual features into a
//! shared latent space, trained with a reconstruction/KL objective plus
//! correlation, distance, discriminative and center losses. The crate also
//! ships a linear CCA baseline and the retrieval metrics (mAP, PR curves,
//! per-category AP, confusion matrices) used to compare them.
//!
//! The numeric core is generic over [`Scalar`]; the `*64` aliases below are
//! what the trainer and CLI use.

pub mod autodiff;
pub mod cca;
pub mod data;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod losses;
pub mod model;
pub mod optim;
pub mod scalar;
pub mod tensor;

pub use autodiff::{Gradients, Tape, Var};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;

pub type Tensor64 = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type ModelParams64 = model::ModelParams<f64>;
pub type ModelParams32 = model::ModelParams<f32>;
pub type PairedDataset64 = data::PairedDataset<f64>;
pub type CcaModel64 = cca::CcaModel<f64>;
pub type LossWeights64 = losses::LossWeights<f64>;
pub type LossReport64 = losses::LossReport<f64>;
