// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! TOML run configuration. Every key is optional; unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cbm::ProbeConfig;
use crate::error::{Error, Result};
use crate::numerics::RngSeed;
use crate::sae::SaeConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every component derives its own seed from it.
    pub seed: u64,
    pub sae: SaeSection,
    pub probe: ProbeSection,
    pub vocab: VocabSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaeSection {
    pub expansion_factor: usize,
    pub lambda1: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub resample_every: usize,
    pub sweep_lr: Vec<f64>,
    pub sweep_lambda1: Vec<f64>,
    pub sweep_expansion: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    pub lambda2: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Keep only this many weights per class after training.
    pub prune_topk: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabSection {
    /// Relative paths resolve against the config file's directory.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Fraction of samples held out when no split file is given.
    pub heldout_fraction: f64,
    /// Compound-node alignment filter; selected on the held-out split when
    /// absent.
    pub min_alignment: Option<f64>,
    /// Concepts listed per explanation.
    pub top: usize,
    pub clusters: usize,
    pub cluster_top: usize,
    pub sparsity_fraction: f64,
}

impl Default for SaeSection {
    fn default() -> Self {
        let base = SaeConfig::default();
        Self {
            expansion_factor: base.expansion_factor,
            lambda1: base.lambda1,
            lr: base.lr,
            epochs: base.epochs,
            batch_size: base.batch_size,
            resample_every: base.resample_every,
            sweep_lr: vec![1e-5, 5e-5, 1e-4, 5e-4, 1e-3],
            sweep_lambda1: vec![3e-5, 1.5e-4, 3e-4, 1.5e-3, 3e-3],
            sweep_expansion: vec![2, 4, 8],
        }
    }
}

impl Default for ProbeSection {
    fn default() -> Self {
        let base = ProbeConfig::default();
        Self {
            lambda2: base.lambda2,
            lr: base.lr,
            epochs: base.epochs,
            prune_topk: None,
        }
    }
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            heldout_fraction: 0.2,
            min_alignment: None,
            top: 5,
            clusters: 8,
            cluster_top: 5,
            sparsity_fraction: 0.9,
        }
    }
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg.to_string()))
    }
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

fn non_negative(x: f64) -> bool {
    x >= 0.0 && x.is_finite()
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Parse `path`; a relative `[vocab] path` is resolved against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        if let (Some(v), Some(dir)) = (&config.vocab.path, path.parent()) {
            if v.is_relative() {
                config.vocab.path = Some(dir.join(v));
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sae;
        check(s.expansion_factor >= 1, "sae.expansion_factor must be >= 1")?;
        check(
            non_negative(s.lambda1),
            "sae.lambda1 must be finite and >= 0",
        )?;
        check(positive(s.lr), "sae.lr must be finite and > 0")?;
        check(s.epochs >= 1, "sae.epochs must be >= 1")?;
        check(s.batch_size >= 1, "sae.batch_size must be >= 1")?;
        check(s.resample_every >= 1, "sae.resample_every must be >= 1")?;
        check(
            !s.sweep_lr.is_empty() && s.sweep_lr.iter().all(|&x| positive(x)),
            "sae.sweep_lr must be a non-empty list of positive rates",
        )?;
        check(
            !s.sweep_lambda1.is_empty() && s.sweep_lambda1.iter().all(|&x| non_negative(x)),
            "sae.sweep_lambda1 must be a non-empty list of non-negative values",
        )?;
        check(
            !s.sweep_expansion.is_empty() && s.sweep_expansion.iter().all(|&x| x >= 1),
            "sae.sweep_expansion must be a non-empty list of factors >= 1",
        )?;

        let p = &self.probe;
        check(
            non_negative(p.lambda2),
            "probe.lambda2 must be finite and >= 0",
        )?;
        check(positive(p.lr), "probe.lr must be finite and > 0")?;
        check(p.epochs >= 1, "probe.epochs must be >= 1")?;
        check(p.prune_topk != Some(0), "probe.prune_topk must be >= 1")?;

        let e = &self.eval;
        check(
            (0.0..1.0).contains(&e.heldout_fraction),
            "eval.heldout_fraction must lie in [0, 1)",
        )?;
        check(
            e.min_alignment.is_none_or(|a| (-1.0..=1.0).contains(&a)),
            "eval.min_alignment must lie in [-1, 1]",
        )?;
        check(e.top >= 1, "eval.top must be >= 1")?;
        check(e.clusters >= 1, "eval.clusters must be >= 1")?;
        check(e.cluster_top >= 1, "eval.cluster_top must be >= 1")?;
        check(
            e.sparsity_fraction > 0.0 && e.sparsity_fraction <= 1.0,
            "eval.sparsity_fraction must lie in (0, 1]",
        )?;
        Ok(())
    }

    pub fn root_seed(&self) -> RngSeed {
        RngSeed(self.seed)
    }

    pub fn sae_config(&self) -> SaeConfig {
        let s = &self.sae;
        SaeConfig {
            expansion_factor: s.expansion_factor,
            lambda1: s.lambda1,
            lr: s.lr,
            epochs: s.epochs,
            batch_size: s.batch_size,
            resample_every: s.resample_every,
            seed: self.root_seed().derive("sae"),
        }
    }

    /// Grid points in `lr`-major, then `λ₁`, then expansion order.
    pub fn sweep_configs(&self) -> Vec<SaeConfig> {
        let base = self.sae_config();
        let s = &self.sae;
        let mut out = Vec::new();
        for &lr in &s.sweep_lr {
            for &lambda1 in &s.sweep_lambda1 {
                for &expansion_factor in &s.sweep_expansion {
                    out.push(SaeConfig {
                        lr,
                        lambda1,
                        expansion_factor,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }

    pub fn probe_config(&self) -> ProbeConfig {
        ProbeConfig {
            lambda2: self.probe.lambda2,
            lr: self.probe.lr,
            epochs: self.probe.epochs,
            seed: self.root_seed().derive("probe"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.sae.expansion_factor, 8);
        assert_eq!(c.sae.lambda1, 3e-5);
        assert_eq!(c.sae.lr, 5e-4);
        assert_eq!(c.sae.epochs, 200);
        assert_eq!(c.sae.resample_every, 10);
        assert_eq!(c.probe.epochs, 200);
        assert_eq!(c.sweep_configs().len(), 75);
    }

    #[test]
    fn sections_override_defaults() {
        let c = RunConfig::from_toml(
            "seed = 9\n[sae]\nepochs = 3\nsweep_lr = [0.1, 0.2]\n[probe]\nprune_topk = 5\n[eval]\nmin_alignment = 0.3\n",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.sae_config().epochs, 3);
        assert_eq!(c.sae_config().seed, RngSeed(9).derive("sae"));
        assert_eq!(c.probe.prune_topk, Some(5));
        assert_eq!(c.eval.min_alignment, Some(0.3));
        assert_eq!(c.sweep_configs().len(), 2 * 5 * 3);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in ["bogus = 1", "[sae]\nlearning_rate = 0.1", "[extra]\n"] {
            let err = RunConfig::from_toml(text).unwrap_err();
            assert_eq!(err.kind(), "invalid_config", "{text}");
        }
    }

    #[test]
    fn ranges_validated() {
        for text in [
            "[sae]\nlr = 0.0",
            "[sae]\nlambda1 = -1.0",
            "[sae]\nepochs = 0",
            "[sae]\nsweep_expansion = []",
            "[probe]\nprune_topk = 0",
            "[probe]\nlr = -0.1",
            "[eval]\nheldout_fraction = 1.0",
            "[eval]\nsparsity_fraction = 0.0",
            "[eval]\nmin_alignment = 2.0",
        ] {
            assert!(RunConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn serialised_config_round_trips() {
        let mut c = RunConfig::default();
        c.probe.prune_topk = Some(3);
        c.vocab.path = Some("words.dncv".into());
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn vocab_path_resolves_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[vocab]\npath = \"words.dncv\"\n").unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.vocab.path, Some(dir.path().join("words.dncv")));
    }
}
