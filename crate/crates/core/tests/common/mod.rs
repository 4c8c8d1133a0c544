// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use dncbm::io::{write_features, write_vocab, FeatureFile, FeatureKind, RunConfig, VocabFile};
use dncbm::naming::Vocabulary;
use dncbm::pipeline::Inputs;
use dncbm::synthetic::{SparseDictionaryData, SparseDictionarySpec};
use dncbm::RngSeed;

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub data: SparseDictionaryData,
    pub features: PathBuf,
    pub vocab: PathBuf,
    pub labels: Vec<usize>,
}

/// Small sparse-dictionary features labelled by whether atom 0 or atom 1
/// carries more weight, with one vocabulary word per atom.
pub fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let data = SparseDictionarySpec {
        d: 12,
        atoms: 10,
        k: 2,
        n: 240,
        min_code: 0.5,
        max_code: 1.5,
    }
    .generate(RngSeed(31))
    .unwrap();
    let labels: Vec<usize> = (0..data.codes.rows())
        .map(|i| usize::from(data.codes.get(i, 1) > data.codes.get(i, 0)))
        .collect();
    let features = dir.path().join("images.dncb");
    write_features(
        &features,
        &FeatureFile::new(FeatureKind::ImageFeatures, data.features.clone())
            .with_labels(labels.clone()),
    )
    .unwrap();
    let words = (0..data.atoms.rows()).map(|i| format!("atom{i}")).collect();
    let vocab = dir.path().join("words.dncv");
    let v = Vocabulary::new(words, data.atoms.clone()).unwrap();
    write_vocab(&vocab, &VocabFile::from(&v)).unwrap();
    Fixture {
        dir,
        data,
        features,
        vocab,
        labels,
    }
}

pub fn quick_config() -> RunConfig {
    let mut c = RunConfig {
        seed: 5,
        ..RunConfig::default()
    };
    c.sae.expansion_factor = 2;
    c.sae.epochs = 10;
    c.sae.lr = 0.05;
    c.sae.lambda1 = 1e-3;
    c.sae.batch_size = 64;
    c.sae.resample_every = 4;
    c.probe.epochs = 30;
    c.probe.lr = 1e-2;
    c.eval.clusters = 3;
    c
}

impl Fixture {
    pub fn inputs(&self, out: &str) -> Inputs {
        Inputs {
            config: quick_config(),
            out: self.dir.path().join(out),
            features: Some(self.features.clone()),
            vocab: Some(self.vocab.clone()),
            ..Inputs::default()
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
