// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! Concept discovery and concept-bottleneck classification over precomputed
//! vision-language embeddings.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense matrices, Adam, losses, k-means.
//! - [`sae`]: a bias-free sparse autoencoder with analytic gradients and a
//!   minibatch training loop that periodically resamples dead latents.
//! - [`naming`]: names each latent after the vocabulary word whose text
//!   embedding is closest (by cosine) to its decoder dictionary vector.
//! - [`cbm`]: sparse linear probes over concept activations, with
//!   explanations, interventions and pruning.
//! - [`eval`]: accuracy, group accuracy, attribute-level Jaccard scoring and
//!   clustering of concept activations.
//! - [`io`] and [`pipeline`]: binary file formats, run configuration and the
//!   commands behind the `dncbm` binary.
//!
//! Hot loops run on rayon when the `parallel` feature is enabled (default).
//! Every parallel path reduces in a fixed order, so results are bit-identical
//! with the sequential fallback.

pub mod cbm;
pub mod error;
pub mod eval;
pub mod exec;
pub mod io;
pub mod naming;
pub mod numerics;
pub mod pipeline;
pub mod sae;
pub mod synthetic;

pub use error::{Error, Result};
pub use exec::Exec;
pub use numerics::{AdamState, Matrix, RngSeed};
