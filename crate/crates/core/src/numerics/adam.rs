// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

use super::Matrix;
use crate::error::{Error, Result};

/// Adam optimiser state for one parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Matrix,
    pub v: Matrix,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdamState {
    /// Zero moments with the usual defaults (0.9, 0.999, 1e-8).
    pub fn new(rows: usize, cols: usize, lr: f64) -> Self {
        Self {
            step: 0,
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
        }
    }

    /// In-place update of `param` by one bias-corrected Adam step.
    pub fn update(&mut self, param: &mut Matrix, grad: &Matrix) -> Result<()> {
        if param.shape() != grad.shape() {
            return Err(Error::DimensionMismatch {
                op: "adam_step",
                left: param.shape(),
                right: grad.shape(),
            });
        }
        if self.m.shape() != param.shape() || self.v.shape() != param.shape() {
            return Err(Error::DimensionMismatch {
                op: "adam_step",
                left: param.shape(),
                right: self.m.shape(),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        let p = param.data_mut();
        let m = self.m.data_mut();
        let v = self.v.data_mut();
        for (((p, m), v), &g) in p.iter_mut().zip(m).zip(v).zip(grad.data()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }

    /// Zero the moments of one row (used when a latent is reinitialised).
    pub fn reset_row(&mut self, i: usize) {
        self.m.row_mut(i).fill(0.0);
        self.v.row_mut(i).fill(0.0);
    }

    pub fn reset_column(&mut self, j: usize) {
        for i in 0..self.m.rows() {
            self.m.set(i, j, 0.0);
            self.v.set(i, j, 0.0);
        }
    }
}

/// Pure form of [`AdamState::update`].
pub fn adam_step(param: &Matrix, grad: &Matrix, state: &AdamState) -> Result<(Matrix, AdamState)> {
    let mut param = param.clone();
    let mut state = state.clone();
    state.update(&mut param, grad)?;
    Ok((param, state))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_identity() {
        let p = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]).unwrap();
        let s = AdamState::new(2, 2, 0.1);
        let (q, s2) = adam_step(&p, &Matrix::zeros(2, 2), &s).unwrap();
        assert_eq!(q, p);
        assert_eq!(s2.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let p = Matrix::zeros(1, 1);
        let g = Matrix::from_rows(&[[1.0]]).unwrap();
        let s = AdamState::new(1, 1, 0.1);
        let (q, _) = adam_step(&p, &g, &s).unwrap();
        // m̂ = 1, v̂ = 1  =>  Δ = -0.1 / (1 + 1e-8)
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((q.get(0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn deterministic() {
        let p = Matrix::from_rows(&[[0.3, 0.7]]).unwrap();
        let g = Matrix::from_rows(&[[0.1, -0.4]]).unwrap();
        let s = AdamState::new(1, 2, 0.01);
        let a = adam_step(&p, &g, &s).unwrap();
        let b = adam_step(&p, &g, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_mismatch() {
        let s = AdamState::new(1, 2, 0.01);
        assert!(adam_step(&Matrix::zeros(1, 2), &Matrix::zeros(2, 1), &s).is_err());
        assert!(adam_step(&Matrix::zeros(2, 2), &Matrix::zeros(2, 2), &s).is_err());
    }
}
