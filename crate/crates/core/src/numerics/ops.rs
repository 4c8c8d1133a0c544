// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

use super::Matrix;
use crate::error::{Error, Result};

#[inline]
pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine_sim(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            op: "cosine_sim",
            left: (1, u.len()),
            right: (1, v.len()),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 {
        return Err(Error::ZeroNorm {
            op: "cosine_sim",
            index: Some(0),
        });
    }
    if nv == 0.0 {
        return Err(Error::ZeroNorm {
            op: "cosine_sim",
            index: Some(1),
        });
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Row-wise softmax.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let lse = log_sum_exp(row);
        for x in row.iter_mut() {
            *x = (*x - lse).exp();
        }
    }
    out
}

/// Mean negative log-likelihood of `labels` under row-wise softmax.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    if logits.rows() != labels.len() {
        return Err(Error::DimensionMismatch {
            op: "cross_entropy",
            left: logits.shape(),
            right: (labels.len(), 1),
        });
    }
    if logits.rows() == 0 {
        return Err(Error::invalid("cross_entropy over zero rows"));
    }
    let k = logits.cols();
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::IndexOutOfRange {
                what: "class labels",
                index: y,
                len: k,
            });
        }
        let row = logits.row(i);
        total += log_sum_exp(row) - row[y];
    }
    Ok(total / labels.len() as f64)
}
