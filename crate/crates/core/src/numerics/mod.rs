// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! Dense linear algebra, optimisation and clustering kernels.

mod adam;
mod kmeans;
pub(crate) mod matrix;
mod ops;
mod rng;

pub use adam::{adam_step, AdamState};
pub use kmeans::{kmeans_fit, kmeans_fit_with, squared_distance, KMeansFit};
pub use matrix::{matmul, matmul_with, Matrix};
pub use ops::{argmax, cosine_sim, cross_entropy, dot, log_sum_exp, norm, softmax_rows};
pub use rng::RngSeed;
