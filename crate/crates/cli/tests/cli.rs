// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use dncbm::io::{write_features, write_vocab, FeatureFile, FeatureKind, VocabFile};
use dncbm::naming::Vocabulary;
use dncbm::synthetic::SparseDictionarySpec;
use dncbm::RngSeed;

fn dncbm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dncbm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn error_json(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{line:?}: {e}"))
}

const CONFIG: &str = "seed = 3\n\
[sae]\nexpansion_factor = 2\nepochs = 6\nlr = 0.05\nlambda1 = 0.001\nbatch_size = 50\nresample_every = 3\n\
[probe]\nepochs = 20\nlr = 0.01\n\
[vocab]\npath = \"words.dncv\"\n";

fn workspace(dir: &Path) {
    let data = SparseDictionarySpec {
        d: 8,
        atoms: 6,
        k: 2,
        n: 120,
        min_code: 0.5,
        max_code: 1.5,
    }
    .generate(RngSeed(9))
    .unwrap();
    let labels = (0..data.codes.rows())
        .map(|i| usize::from(data.codes.get(i, 1) > data.codes.get(i, 0)))
        .collect();
    write_features(
        &dir.join("images.dncb"),
        &FeatureFile::new(FeatureKind::ImageFeatures, data.features).with_labels(labels),
    )
    .unwrap();
    let words = (0..data.atoms.rows()).map(|i| format!("atom{i}")).collect();
    let v = Vocabulary::new(words, data.atoms).unwrap();
    write_vocab(&dir.join("words.dncv"), &VocabFile::from(&v)).unwrap();
    std::fs::write(dir.join("run.toml"), CONFIG).unwrap();
}

fn full_run(dir: &Path) {
    let common = [
        "--config",
        "run.toml",
        "--features",
        "images.dncb",
        "--out",
        "out",
    ];
    for (cmd, extra) in [
        ("train-sae", vec![]),
        ("name", vec!["--checkpoint", "out/sae.ckpt"]),
        ("train-probe", vec!["--checkpoint", "out/sae.ckpt"]),
        (
            "explain",
            vec!["--checkpoint", "out/sae.ckpt", "--probe", "out/probe.dncp"],
        ),
    ] {
        let mut args = vec![cmd];
        args.extend(common);
        args.extend(extra);
        let out = dncbm(dir, &args);
        assert!(
            out.status.success(),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn runs_in_different_directories_produce_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        workspace(dir);
        full_run(dir);
    }
    for name in [
        "sae.ckpt",
        "sae_history.csv",
        "names.csv",
        "probe.dncp",
        "explanations.csv",
        "explanations.txt",
    ] {
        let x = std::fs::read(a.path().join("out").join(name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    workspace(dir.path());
    let base = [
        "train-sae",
        "--config",
        "run.toml",
        "--features",
        "images.dncb",
    ];
    let run = |out: &str, seed: &str| {
        let mut args = base.to_vec();
        args.extend(["--out", out, "--seed", seed]);
        assert!(dncbm(dir.path(), &args).status.success());
        std::fs::read(dir.path().join(out).join("sae.ckpt")).unwrap()
    };
    assert_eq!(run("a", "3"), run("b", "3"));
    assert_ne!(run("a", "3"), run("c", "4"));
}

#[test]
fn missing_input_is_a_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dncbm(dir.path(), &["train-sae", "--out", "out"]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_json(&out);
    assert_eq!(err["error"]["kind"], "missing_input");
    assert!(err["error"]["message"]
        .as_str()
        .unwrap()
        .contains("--features"));
}

#[test]
fn bad_files_report_their_kind() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("junk.dncb"), b"not a feature file").unwrap();
    let out = dncbm(
        dir.path(),
        &["train-sae", "--features", "junk.dncb", "--out", "out"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "bad_magic");

    std::fs::write(dir.path().join("bad.toml"), "[sae]\nlearning_rate = 1\n").unwrap();
    let out = dncbm(
        dir.path(),
        &["train-sae", "--config", "bad.toml", "--out", "out"],
    );
    assert_eq!(error_json(&out)["error"]["kind"], "invalid_config");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dncbm(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "usage");

    let help = dncbm(dir.path(), &["--help"]);
    assert!(help.status.success());
    assert!(String::from_utf8_lossy(&help.stdout).contains("train-sae"));
}
