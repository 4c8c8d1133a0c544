// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{fixture, read};
use dncbm::io::{load_checkpoint, load_probe, write_features, FeatureFile, FeatureKind};
use dncbm::pipeline::{run, Command};
use dncbm::Matrix;

#[test]
fn every_command_runs_on_a_small_fixture() {
    let fx = fixture();
    let mut inputs = fx.inputs("out");
    let out = inputs.out.clone();

    let s = run(Command::TrainSae, &inputs).unwrap();
    assert_eq!(s.get("h"), Some("24"));
    let model = load_checkpoint(&out.join("sae.ckpt")).unwrap();
    assert_eq!((model.d(), model.h()), (12, 24));
    assert_eq!(read(&out.join("sae_history.csv")).lines().count(), 11);
    assert!(read(&out.join("train-sae.txt")).starts_with("samples: 240\n"));

    inputs.checkpoint = Some(out.join("sae.ckpt"));
    run(Command::Name, &inputs).unwrap();
    let names = read(&out.join("names.csv"));
    assert!(names.starts_with("concept_index,name,alignment\n"));
    assert_eq!(names.lines().count(), 25);

    inputs.config.probe.prune_topk = Some(4);
    let s = run(Command::TrainProbe, &inputs).unwrap();
    let probe = load_probe(&out.join("probe.dncp")).unwrap();
    assert!((0..probe.k()).all(|k| probe.nonzero_in_class(k) <= 4));
    let train_acc: f64 = s.get("train_accuracy").unwrap().parse().unwrap();
    assert!(train_acc > 0.6, "{train_acc}");

    inputs.probe = Some(out.join("probe.dncp"));
    run(Command::Explain, &inputs).unwrap();
    let local = read(&out.join("explanations.csv"));
    assert!(local.starts_with("sample_id,rank,concept_index,name,contribution\n"));
    assert!(read(&out.join("explanations.txt")).starts_with("sample 0: "));
    assert!(read(&out.join("global_explanations.csv")).contains("\n0,1,"));

    let groups = fx.path("groups.txt");
    let list: String = (0..240).map(|i| format!("{}\n", i % 3)).collect();
    std::fs::write(&groups, list).unwrap();
    inputs.groups = Some(groups);
    let s = run(Command::EvalAccuracy, &inputs).unwrap();
    assert!(s.get("worst_group_accuracy").is_some());
    assert_eq!(read(&out.join("accuracy.csv")).lines().count(), 5);

    let spec = fx.path("intervention.toml");
    std::fs::write(
        &spec,
        "mode = \"remove\"\nnames = [\"atom0\"]\nindices = [1]\n",
    )
    .unwrap();
    inputs.intervention = Some(spec);
    inputs.out = fx.path("edited");
    let s = run(Command::Intervene, &inputs).unwrap();
    assert_eq!(s.get("mode"), Some("remove"));
    assert!(s.get("after_accuracy").is_some());
    let edited = load_probe(&fx.path("edited/probe.dncp")).unwrap();
    assert!(edited.weights().row(1).iter().all(|&w| w == 0.0));

    inputs.out = out.clone();
    let s = run(Command::Cluster, &inputs).unwrap();
    assert_eq!(s.get("clusters"), Some("3"));
    assert_eq!(read(&out.join("cluster_members.csv")).lines().count(), 241);
    assert!(read(&out.join("clusters.csv"))
        .starts_with("cluster,size,rank,concept_index,name,strength\n"));
}

#[test]
fn eval_jaccard_scores_attribute_names() {
    let fx = fixture();
    let mut inputs = fx.inputs("out");
    run(Command::TrainSae, &inputs).unwrap();
    inputs.checkpoint = Some(inputs.out.join("sae.ckpt"));

    // Ground truth: which atoms generated each sample.
    let truth = fx.data.codes.clone();
    let binary = Matrix::new(
        truth.rows(),
        truth.cols(),
        truth
            .data()
            .iter()
            .map(|&c| if c > 0.0 { 1.0 } else { 0.0 })
            .collect(),
    )
    .unwrap();
    let attributes = fx.path("attributes.dncb");
    write_features(
        &attributes,
        &FeatureFile::new(FeatureKind::Activations, binary),
    )
    .unwrap();
    let names = fx.path("attribute_names.txt");
    let list: String = (0..truth.cols()).map(|i| format!("atom{i}\n")).collect();
    std::fs::write(&names, list).unwrap();
    inputs.attributes = Some(attributes);
    inputs.attribute_names = Some(names);

    let s = run(Command::EvalJaccard, &inputs).unwrap();
    let score: f64 = s.get("mean_jaccard").unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&score));
    assert_eq!(s.get("heldout"), Some("48"));
    assert_eq!(read(&inputs.out.join("jaccard.csv")).lines().count(), 11);

    inputs.config.eval.min_alignment = Some(1.0);
    let strict = run(Command::EvalJaccard, &inputs).unwrap();
    assert_eq!(strict.get("min_alignment"), Some("1.000000"));
}

#[test]
fn sweep_trains_every_grid_point_and_records_a_winner() {
    let fx = fixture();
    let mut inputs = fx.inputs("sweep");
    inputs.config.sae.sweep_lr = vec![0.01, 0.05];
    inputs.config.sae.sweep_lambda1 = vec![1e-4];
    inputs.config.sae.sweep_expansion = vec![1, 2];
    run(Command::Sweep, &inputs).unwrap();
    for i in 0..4 {
        assert!(inputs
            .out
            .join(format!("runs/run-{i:03}/sae.ckpt"))
            .exists());
    }
    let selection: toml::Table = read(&inputs.out.join("selection.toml")).parse().unwrap();
    assert_eq!(
        selection["criterion"].as_str(),
        Some("heldout_reconstruction")
    );
    assert_eq!(selection["runs"].as_array().unwrap().len(), 4);
    let winner = selection["winner"].as_integer().unwrap();
    assert!((0..4).contains(&winner));

    let text = fx.path("classes.dncb");
    write_features(
        &text,
        &FeatureFile::new(
            FeatureKind::TextEmbeddings,
            fx.data.atoms.select_rows(&[0, 1]).unwrap(),
        ),
    )
    .unwrap();
    inputs.text_embeddings = Some(text);
    run(Command::Sweep, &inputs).unwrap();
    let selection: toml::Table = read(&inputs.out.join("selection.toml")).parse().unwrap();
    assert_eq!(selection["criterion"].as_str(), Some("zero_shot_accuracy"));
}

#[test]
fn wrong_feature_kind_is_rejected() {
    let fx = fixture();
    let mut inputs = fx.inputs("out");
    let text = fx.path("text.dncb");
    write_features(
        &text,
        &FeatureFile::new(FeatureKind::TextEmbeddings, fx.data.atoms.clone()),
    )
    .unwrap();
    inputs.features = Some(text);
    assert_eq!(
        run(Command::TrainSae, &inputs).unwrap_err().kind(),
        "wrong_kind"
    );
}
