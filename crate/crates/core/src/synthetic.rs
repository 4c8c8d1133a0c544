// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! Synthetic data with known ground truth: sparse-dictionary features with
//! the greedy atom matching used to score dictionary recovery, and concept
//! activations with a spurious background correlation.

use rand::seq::index;
use rand::Rng;

use crate::cbm::LabeledActivations;
use crate::error::{Error, Result};
use crate::eval::GroupedDataset;
use crate::numerics::{cosine_sim, norm, Matrix, RngSeed};
use crate::sae::ConceptActivations;

/// Samples `a = Σ s_i · atom_i` with `k` non-negative non-zero codes each.
#[derive(Debug, Clone)]
pub struct SparseDictionaryData {
    /// `h_true×d`, unit-norm rows.
    pub atoms: Matrix,
    /// `n×h_true` non-negative codes.
    pub codes: Matrix,
    /// `n×d` observations.
    pub features: Matrix,
}

#[derive(Debug, Clone, Copy)]
pub struct SparseDictionarySpec {
    pub d: usize,
    pub atoms: usize,
    pub k: usize,
    pub n: usize,
    /// Non-zero code magnitudes are log-uniform in `[min_code, max_code]`.
    pub min_code: f64,
    pub max_code: f64,
}

impl SparseDictionarySpec {
    pub fn generate(&self, seed: RngSeed) -> Result<SparseDictionaryData> {
        if self.k > self.atoms || self.d == 0 || self.atoms == 0 {
            return Err(Error::invalid("need 0 < k <= atoms and d > 0"));
        }
        if !(self.min_code > 0.0 && self.min_code <= self.max_code) {
            return Err(Error::invalid("need 0 < min_code <= max_code"));
        }
        let (lo, hi) = (self.min_code.ln(), self.max_code.ln());
        let mut rng = seed.rng();
        let mut atoms = Matrix::zeros(self.atoms, self.d);
        for i in 0..self.atoms {
            let row = atoms.row_mut(i);
            loop {
                row.iter_mut().for_each(|x| *x = gaussian(&mut rng));
                let len = norm(row);
                if len > 1e-6 {
                    row.iter_mut().for_each(|x| *x /= len);
                    break;
                }
            }
        }
        let mut codes = Matrix::zeros(self.n, self.atoms);
        for i in 0..self.n {
            for j in index::sample(&mut rng, self.atoms, self.k) {
                let t: f64 = rng.random();
                codes.set(i, j, (lo + t * (hi - lo)).exp());
            }
        }
        let features = crate::numerics::matmul(&codes, &atoms)?;
        Ok(SparseDictionaryData {
            atoms,
            codes,
            features,
        })
    }
}

/// Two-class concept activations with a spuriously correlated background.
///
/// Concepts 0 and 1 are core evidence for class 0 and class 1. Concepts 2
/// and 3 are backgrounds. In training the background matches the class with
/// probability `train_alignment`; in the test set every (class, background)
/// group has the same size. The remaining concepts are label-independent
/// noise.
#[derive(Debug, Clone, Copy)]
pub struct SpuriousSpec {
    pub n_train: usize,
    /// Per group; the test set has `4 × n_test_per_group` samples.
    pub n_test_per_group: usize,
    pub noise_concepts: usize,
    pub train_alignment: f64,
}

#[derive(Debug, Clone)]
pub struct SpuriousData {
    pub train: LabeledActivations,
    /// Group `2·label + background`.
    pub test: GroupedDataset,
    pub core: Vec<usize>,
    pub spurious: Vec<usize>,
}

impl SpuriousSpec {
    pub fn h(&self) -> usize {
        4 + self.noise_concepts
    }

    pub fn generate(&self, seed: RngSeed) -> Result<SpuriousData> {
        if !(0.0..=1.0).contains(&self.train_alignment) {
            return Err(Error::invalid("train_alignment must lie in [0, 1]"));
        }
        let mut rng = seed.rng();
        let h = self.h();
        let mut rows = Vec::with_capacity(self.n_train);
        let mut labels = Vec::with_capacity(self.n_train);
        for i in 0..self.n_train {
            let label = i % 2;
            let aligned = rng.random::<f64>() < self.train_alignment;
            let background = if aligned { label } else { 1 - label };
            rows.push(spurious_row(&mut rng, h, label, background));
            labels.push(label);
        }
        let train =
            LabeledActivations::new(ConceptActivations::new(Matrix::from_rows(&rows)?)?, labels)?;

        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut groups = Vec::new();
        for label in 0..2 {
            for background in 0..2 {
                for _ in 0..self.n_test_per_group {
                    rows.push(spurious_row(&mut rng, h, label, background));
                    labels.push(label);
                    groups.push(2 * label + background);
                }
            }
        }
        let test = GroupedDataset::new(
            LabeledActivations::new(ConceptActivations::new(Matrix::from_rows(&rows)?)?, labels)?,
            groups,
            4,
        )?;
        Ok(SpuriousData {
            train,
            test,
            core: vec![0, 1],
            spurious: vec![2, 3],
        })
    }
}

fn spurious_row<R: Rng>(rng: &mut R, h: usize, label: usize, background: usize) -> Vec<f64> {
    let mut row = vec![0.0; h];
    row[label] = rng.random_range(0.3..1.0);
    if rng.random::<f64>() < 0.3 {
        row[1 - label] = rng.random_range(0.0..0.5);
    }
    row[2 + background] = rng.random_range(0.5..1.5);
    for x in &mut row[4..] {
        if rng.random::<f64>() < 0.3 {
            *x = rng.random();
        }
    }
    row
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Greedy one-to-one matching of true atoms to learned dictionary rows by
/// descending cosine. Returns `(atom, row, cosine)` triples.
pub fn greedy_match(atoms: &Matrix, dictionary: &Matrix) -> Vec<(usize, usize, f64)> {
    let mut pairs = Vec::with_capacity(atoms.rows() * dictionary.rows());
    for i in 0..atoms.rows() {
        for j in 0..dictionary.rows() {
            if let Ok(c) = cosine_sim(atoms.row(i), dictionary.row(j)) {
                pairs.push((i, j, c));
            }
        }
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut used_atom = vec![false; atoms.rows()];
    let mut used_row = vec![false; dictionary.rows()];
    let mut out = Vec::new();
    for (i, j, c) in pairs {
        if !used_atom[i] && !used_row[j] {
            used_atom[i] = true;
            used_row[j] = true;
            out.push((i, j, c));
        }
    }
    out.sort_by_key(|p| p.0);
    out
}

/// Fraction of atoms matched at cosine `>= threshold`.
pub fn recovery_rate(atoms: &Matrix, dictionary: &Matrix, threshold: f64) -> f64 {
    let hits = greedy_match(atoms, dictionary)
        .iter()
        .filter(|p| p.2 >= threshold)
        .count();
    hits as f64 / atoms.rows() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_shapes_and_sparsity() {
        let spec = SparseDictionarySpec {
            d: 8,
            atoms: 12,
            k: 3,
            n: 50,
            min_code: 0.5,
            max_code: 1.5,
        };
        let data = spec.generate(RngSeed(0)).unwrap();
        assert_eq!(data.features.shape(), (50, 8));
        for row in data.atoms.row_iter() {
            assert!((norm(row) - 1.0).abs() < 1e-12);
        }
        for row in data.codes.row_iter() {
            assert_eq!(row.iter().filter(|&&c| c > 0.0).count(), 3);
        }
    }

    #[test]
    fn perfect_dictionary_is_fully_recovered() {
        let spec = SparseDictionarySpec {
            d: 8,
            atoms: 12,
            k: 3,
            n: 5,
            min_code: 1.0,
            max_code: 1.0,
        };
        let data = spec.generate(RngSeed(1)).unwrap();
        assert_eq!(
            recovery_rate(&data.atoms, &data.atoms.scale(3.0), 0.999),
            1.0
        );
        let m = greedy_match(&data.atoms, &data.atoms);
        assert!(m.iter().all(|(i, j, _)| i == j));
    }

    #[test]
    fn spurious_groups_and_alignment() {
        let spec = SpuriousSpec {
            n_train: 2000,
            n_test_per_group: 10,
            noise_concepts: 3,
            train_alignment: 0.9,
        };
        let data = spec.generate(RngSeed(3)).unwrap();
        assert_eq!(data.train.h(), 7);
        assert_eq!(data.test.data.n(), 40);
        let acts = data.train.activations();
        let aligned = (0..data.train.n())
            .filter(|&i| {
                let y = data.train.labels()[i];
                acts.row(i)[2 + y] > 0.0 && acts.row(i)[3 - y] == 0.0
            })
            .count() as f64
            / data.train.n() as f64;
        assert!((aligned - 0.9).abs() < 0.03, "{aligned}");
        for (i, &g) in data.test.groups().iter().enumerate() {
            let y = data.test.data.labels()[i];
            let row = data.test.data.activations().row(i);
            assert_eq!(g / 2, y);
            assert!(row[2 + g % 2] >= 0.5);
            assert!(row[y] >= 0.3 && row[y] > row[1 - y]);
        }
        assert!(SpuriousSpec {
            train_alignment: 1.5,
            ..spec
        }
        .generate(RngSeed(0))
        .is_err());
    }
}
