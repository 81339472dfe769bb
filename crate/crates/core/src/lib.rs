//! Embedding-level prompt augmentation (AELIF masking and noise convolution)
//! inside a small conditional diffusion model, with the evaluation pipelines
//! used to measure whether the augmentations buy robustness to typo'd prompts.
//!
//! Data flows token sequence → text encoder → augmentation → denoiser:
//!
//! * [`text`] tokenizes prompts and encodes them into per-token embeddings.
//! * [`aelif`] perturbs those embeddings.
//! * [`diffusion`] trains and samples the conditional denoiser.
//! * [`perturb`] generates typo'd prompts.
//! * [`metrics`] extracts features and computes cosine / Wasserstein distances.
//! * [`pipeline`] runs both evaluation procedures and writes reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aelif;
pub mod diffusion;
pub mod error;
pub mod fixtures;
pub mod metrics;
pub mod perturb;
pub mod pipeline;
pub mod rng;
pub mod tensor;
pub mod text;

pub use error::{Error, Result};
