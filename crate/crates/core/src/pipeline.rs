// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! End-to-end commands behind the `dncbm` binary.
//!
//! Each command reads its inputs, validates shapes against the checkpoint,
//! and writes its artifacts plus a `<command>.txt` summary into the output
//! directory. Artifacts depend only on input bytes, the config and the seed;
//! they never embed paths or timestamps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cbm::{
    explain_global, explain_local, intervene, predict, prune_topk, sparsity_of_decision,
    train_probe, CbmProbe, LabeledActivations,
};
use crate::error::{Error, Result};
use crate::eval::{
    accuracy, attribute_match_eval, attribute_strengths, cluster_concepts, group_accuracy,
    seeded_split, select_min_alignment, GroupedDataset,
};
use crate::io::{
    atomic_write, cluster_csv, explanations_csv, global_explanation_csv, load_checkpoint,
    load_probe, names_csv, read_features, read_index_list, read_lines, read_vocab, sae_history_csv,
    save_checkpoint, save_probe, FeatureFile, FeatureKind, InterventionFile, RunConfig,
};
use crate::naming::{assign_names, merge_compound_nodes, NamedConceptSpace, Vocabulary};
use crate::numerics::{argmax, dot, norm, Matrix};
use crate::sae::{encode, reconstruct, sae_loss, train_sae, ConceptActivations, SaeModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    TrainSae,
    Name,
    TrainProbe,
    Explain,
    Intervene,
    EvalJaccard,
    EvalAccuracy,
    Cluster,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::TrainSae => "train-sae",
            Command::Name => "name",
            Command::TrainProbe => "train-probe",
            Command::Explain => "explain",
            Command::Intervene => "intervene",
            Command::EvalJaccard => "eval-jaccard",
            Command::EvalAccuracy => "eval-accuracy",
            Command::Cluster => "cluster",
            Command::Sweep => "sweep",
        }
    }
}

/// Everything a command may read. Unused inputs are ignored.
#[derive(Debug, Clone, Default)]
pub struct Inputs {
    pub config: RunConfig,
    pub out: PathBuf,
    pub features: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub probe: Option<PathBuf>,
    pub text_embeddings: Option<PathBuf>,
    /// Held-out sample indices, one per line.
    pub split: Option<PathBuf>,
    /// Group index per sample, one per line.
    pub groups: Option<PathBuf>,
    /// Binary `N×C` attribute matrix as a feature file.
    pub attributes: Option<PathBuf>,
    /// `C` attribute names, one per line.
    pub attribute_names: Option<PathBuf>,
    pub intervention: Option<PathBuf>,
    /// `K` class names, one per line.
    pub class_names: Option<PathBuf>,
}

/// Key/value summary of a finished command.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub command: &'static str,
    pub entries: Vec<(String, String)>,
}

impl Summary {
    fn new(command: Command) -> Self {
        Self {
            command: command.name(),
            entries: Vec::new(),
        }
    }

    fn add(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}: {v}");
        }
        out
    }
}

pub fn run(command: Command, inputs: &Inputs) -> Result<Summary> {
    inputs.config.validate()?;
    std::fs::create_dir_all(&inputs.out).map_err(|e| Error::io(&inputs.out, e))?;
    let summary = match command {
        Command::TrainSae => train_sae_cmd(inputs),
        Command::Name => name_cmd(inputs),
        Command::TrainProbe => train_probe_cmd(inputs),
        Command::Explain => explain_cmd(inputs),
        Command::Intervene => intervene_cmd(inputs),
        Command::EvalJaccard => eval_jaccard_cmd(inputs),
        Command::EvalAccuracy => eval_accuracy_cmd(inputs),
        Command::Cluster => cluster_cmd(inputs),
        Command::Sweep => sweep_cmd(inputs),
    }?;
    let file = inputs.out.join(format!("{}.txt", command.name()));
    atomic_write(&file, summary.render().as_bytes())?;
    Ok(summary)
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::MissingInput(format!("{flag} is required")))
}

fn write(inputs: &Inputs, name: &str, bytes: &[u8]) -> Result<()> {
    atomic_write(&inputs.out.join(name), bytes)
}

fn image_features(inputs: &Inputs) -> Result<FeatureFile> {
    let path = require(&inputs.features, "--features")?;
    let file = read_features(path)?;
    file.expect_kind(FeatureKind::ImageFeatures)
        .map_err(|e| e.at(path))?;
    Ok(file)
}

fn labels(file: &FeatureFile, inputs: &Inputs) -> Result<Vec<usize>> {
    file.labels.clone().ok_or_else(|| {
        Error::MissingInput(format!(
            "{} has no label block",
            inputs
                .features
                .as_deref()
                .unwrap_or(Path::new("features"))
                .display()
        ))
    })
}

fn checkpoint(inputs: &Inputs) -> Result<SaeModel> {
    load_checkpoint(require(&inputs.checkpoint, "--checkpoint")?)
}

fn vocabulary(inputs: &Inputs) -> Result<Vocabulary> {
    let path = inputs
        .vocab
        .as_deref()
        .or(inputs.config.vocab.path.as_deref())
        .ok_or_else(|| {
            Error::MissingInput("a vocabulary (--vocab or [vocab] path) is required".into())
        })?;
    read_vocab(path)?.into_vocabulary()
}

fn probe(inputs: &Inputs, model: Option<&SaeModel>) -> Result<CbmProbe> {
    let p = load_probe(require(&inputs.probe, "--probe")?)?;
    if let Some(m) = model {
        if p.h() != m.h() {
            return Err(Error::DimensionMismatch {
                op: "probe vs checkpoint",
                left: p.weights().shape(),
                right: m.decoder().shape(),
            });
        }
    }
    Ok(p)
}

fn concepts(model: &SaeModel, file: &FeatureFile) -> Result<ConceptActivations> {
    encode(model, &file.matrix)
}

fn class_names(inputs: &Inputs, labels: &[usize]) -> Result<Vec<String>> {
    let needed = labels.iter().max().map_or(0, |m| m + 1).max(2);
    match &inputs.class_names {
        Some(path) => {
            let names = read_lines(path)?;
            if names.len() < needed {
                return Err(Error::invalid(format!(
                    "{} class names but labels need at least {needed}",
                    names.len()
                )));
            }
            Ok(names)
        }
        None => Ok((0..needed).map(|k| format!("class{k}")).collect()),
    }
}

/// Held-out indices from `--split`, else a seeded fraction of `0..n`.
fn split(inputs: &Inputs, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    match &inputs.split {
        Some(path) => {
            let mut heldout = read_index_list(path)?;
            heldout.sort_unstable();
            heldout.dedup();
            if let Some(&i) = heldout.iter().find(|&&i| i >= n) {
                return Err(Error::IndexOutOfRange {
                    what: "split samples",
                    index: i,
                    len: n,
                });
            }
            let rest = (0..n)
                .filter(|i| heldout.binary_search(i).is_err())
                .collect();
            Ok((heldout, rest))
        }
        None => seeded_split(
            n,
            inputs.config.eval.heldout_fraction,
            inputs.config.root_seed().derive("split"),
        ),
    }
}

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

fn train_sae_cmd(inputs: &Inputs) -> Result<Summary> {
    let features = image_features(inputs)?;
    let config = inputs.config.sae_config();
    let trained = train_sae(&features.matrix, &config)?;
    let model = trained.model.round_to_f32();
    save_checkpoint(&inputs.out.join("sae.ckpt"), &model)?;
    write(
        inputs,
        "sae_history.csv",
        &sae_history_csv(&trained.history)?,
    )?;

    let final_loss = sae_loss(&model, &features.matrix, config.lambda1)?;
    let mut s = Summary::new(Command::TrainSae);
    s.add("samples", features.matrix.rows());
    s.add("d", model.d());
    s.add("h", model.h());
    s.add("epochs", config.epochs);
    s.add("recon_l2", final_loss.recon_l2);
    s.add("sparsity_l1", final_loss.sparsity_l1);
    s.add("mean_active", final_loss.mean_active);
    s.add(
        "resampled_latents",
        trained
            .resampled
            .iter()
            .map(|(_, v)| v.len())
            .sum::<usize>(),
    );
    Ok(s)
}

fn named_space(inputs: &Inputs, model: &SaeModel) -> Result<NamedConceptSpace> {
    assign_names(model, &vocabulary(inputs)?)
}

fn name_cmd(inputs: &Inputs) -> Result<Summary> {
    let model = checkpoint(inputs)?;
    let vocab = vocabulary(inputs)?;
    let space = assign_names(&model, &vocab)?;
    write(inputs, "names.csv", &names_csv(&space)?)?;

    let alignments = space.alignments();
    let mut distinct: Vec<&str> = space.concepts.iter().map(|c| c.name.as_str()).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let mut s = Summary::new(Command::Name);
    s.add("concepts", space.len());
    s.add("vocabulary", vocab.len());
    s.add("distinct_names", distinct.len());
    s.add(
        "mean_alignment",
        fmt6(alignments.iter().sum::<f64>() / alignments.len().max(1) as f64),
    );
    Ok(s)
}

fn train_probe_cmd(inputs: &Inputs) -> Result<Summary> {
    let model = checkpoint(inputs)?;
    let features = image_features(inputs)?;
    let labels = labels(&features, inputs)?;
    let acts = concepts(&model, &features)?;
    let names = class_names(inputs, &labels)?;
    let data = LabeledActivations::new(acts, labels)?;
    let mut probe = train_probe(&data, names, &inputs.config.probe_config())?;
    if let Some(k) = inputs.config.probe.prune_topk {
        probe = prune_topk(&probe, k)?;
    }
    // Report on the stored (f32) weights so that a reload reproduces it.
    let probe = CbmProbe::new(
        probe.weights().round_to_f32(),
        probe.class_names().to_vec(),
        probe.lambda2(),
    )?;
    save_probe(&inputs.out.join("probe.dncp"), &probe)?;

    let pred = predict(&probe, data.activations())?;
    let sparsity = sparsity_of_decision(
        &probe,
        data.activations(),
        inputs.config.eval.sparsity_fraction,
    )?;
    let mut s = Summary::new(Command::TrainProbe);
    s.add("samples", data.n());
    s.add("classes", probe.k());
    s.add(
        "train_accuracy",
        fmt6(accuracy(&pred.classes, data.labels())?),
    );
    s.add(
        "nonzero_weights",
        (0..probe.k())
            .map(|k| probe.nonzero_in_class(k))
            .sum::<usize>(),
    );
    add_sparsity(&mut s, &sparsity);
    Ok(s)
}

fn add_sparsity(s: &mut Summary, r: &crate::cbm::SparsityReport) {
    s.add(
        "sparsity_of_decision",
        r.mean.map_or_else(|| "n/a".to_string(), fmt6),
    );
    s.add("sparsity_excluded", r.excluded);
}

fn explain_cmd(inputs: &Inputs) -> Result<Summary> {
    let model = checkpoint(inputs)?;
    let probe = probe(inputs, Some(&model))?;
    let features = image_features(inputs)?;
    let space = named_space(inputs, &model)?;
    let acts = concepts(&model, &features)?;
    let top = inputs.config.eval.top.min(probe.h());

    let mut local = Vec::with_capacity(acts.n());
    let mut report = String::new();
    for i in 0..acts.n() {
        let e = explain_local(&probe, &space, acts.row(i), top)?;
        let _ = writeln!(
            report,
            "sample {i}: {} (logit {:.6})",
            probe.class_names()[e.prediction],
            e.logit
        );
        for c in &e.entries {
            let _ = writeln!(
                report,
                "  {:+.6}  {} [{}]",
                c.contribution, c.name, c.concept
            );
        }
        local.push((i, e));
    }
    write(inputs, "explanations.csv", &explanations_csv(&local)?)?;
    write(inputs, "explanations.txt", report.as_bytes())?;

    let mut s = Summary::new(Command::Explain);
    s.add("samples", acts.n());
    s.add("top", top);
    if let Some(labels) = features.labels.clone() {
        let data = LabeledActivations::new(acts, labels)?;
        let mut global = Vec::new();
        for class in 0..probe.k() {
            if data.labels().contains(&class) {
                global.push(explain_global(&probe, &space, &data, class, top)?);
            }
        }
        write(
            inputs,
            "global_explanations.csv",
            &global_explanation_csv(&global)?,
        )?;
        s.add("classes_explained", global.len());
    }
    Ok(s)
}

fn grouped(inputs: &Inputs, data: LabeledActivations) -> Result<Option<GroupedDataset>> {
    let Some(path) = &inputs.groups else {
        return Ok(None);
    };
    let groups = read_index_list(path)?;
    let g = groups.iter().max().map_or(0, |m| m + 1);
    Ok(Some(GroupedDataset::new(data, groups, g)?))
}

fn add_accuracy(
    s: &mut Summary,
    prefix: &str,
    probe: &CbmProbe,
    data: &LabeledActivations,
    groups: Option<&GroupedDataset>,
) -> Result<Vec<(String, usize, f64)>> {
    let pred = predict(probe, data.activations())?;
    let overall = accuracy(&pred.classes, data.labels())?;
    s.add(&format!("{prefix}accuracy"), fmt6(overall));
    let mut rows = vec![("overall".to_string(), data.n(), overall)];
    if let Some(g) = groups {
        let r = group_accuracy(g, &pred.classes)?;
        for (i, (&a, &size)) in r.per_group.iter().zip(&r.sizes).enumerate() {
            s.add(&format!("{prefix}group_{i}_accuracy"), fmt6(a));
            rows.push((format!("group_{i}"), size, a));
        }
        s.add(
            &format!("{prefix}worst_group_accuracy"),
            fmt6(r.worst_group()),
        );
    }
    Ok(rows)
}

fn intervene_cmd(inputs: &Inputs) -> Result<Summary> {
    let spec_file = InterventionFile::load(require(&inputs.intervention, "--intervention")?)?;
    let model = match &inputs.checkpoint {
        Some(p) => Some(load_checkpoint(p)?),
        None => None,
    };
    let probe = probe(inputs, model.as_ref())?;
    let space = match (&model, spec_file.names.is_empty()) {
        (Some(m), false) => Some(named_space(inputs, m)?),
        _ => None,
    };
    let spec = spec_file.resolve(space.as_ref())?;
    let edited = intervene(&probe, &spec)?;
    save_probe(&inputs.out.join("probe.dncp"), &edited)?;

    let mut s = Summary::new(Command::Intervene);
    s.add("mode", &spec_file.mode);
    s.add("concepts", spec.concepts.len());
    if let (Some(m), Some(_)) = (&model, &inputs.features) {
        let features = image_features(inputs)?;
        let data = LabeledActivations::new(concepts(m, &features)?, labels(&features, inputs)?)?;
        let groups = grouped(inputs, data.clone())?;
        add_accuracy(&mut s, "before_", &probe, &data, groups.as_ref())?;
        add_accuracy(&mut s, "after_", &edited, &data, groups.as_ref())?;
    }
    Ok(s)
}

fn eval_accuracy_cmd(inputs: &Inputs) -> Result<Summary> {
    let model = checkpoint(inputs)?;
    let probe = probe(inputs, Some(&model))?;
    let features = image_features(inputs)?;
    let data = LabeledActivations::new(concepts(&model, &features)?, labels(&features, inputs)?)?;
    let groups = grouped(inputs, data.clone())?;
    let mut s = Summary::new(Command::EvalAccuracy);
    let rows = add_accuracy(&mut s, "", &probe, &data, groups.as_ref())?;
    let sparsity = sparsity_of_decision(
        &probe,
        data.activations(),
        inputs.config.eval.sparsity_fraction,
    )?;
    add_sparsity(&mut s, &sparsity);

    let mut csv = String::from("subset,size,accuracy\n");
    for (name, size, a) in rows {
        let _ = writeln!(csv, "{name},{size},{a}");
    }
    write(inputs, "accuracy.csv", csv.as_bytes())?;
    Ok(s)
}

fn eval_jaccard_cmd(inputs: &Inputs) -> Result<Summary> {
    let model = checkpoint(inputs)?;
    let features = image_features(inputs)?;
    let space = named_space(inputs, &model)?;
    let acts = concepts(&model, &features)?;
    let truth = read_features(require(&inputs.attributes, "--attributes")?)?.matrix;
    let names = read_lines(require(&inputs.attribute_names, "--attribute-names")?)?;
    if truth.shape() != (acts.n(), names.len()) {
        return Err(Error::DimensionMismatch {
            op: "eval-jaccard attributes",
            left: truth.shape(),
            right: (acts.n(), names.len()),
        });
    }
    let (heldout, eval) = split(inputs, acts.n())?;
    let min_alignment = match inputs.config.eval.min_alignment {
        Some(a) => a,
        None => select_min_alignment(&space, &acts, &names, &truth, &heldout)?,
    };
    let nodes = merge_compound_nodes(&space, &acts, min_alignment)?;
    let strengths = attribute_strengths(&nodes, &names);
    let result = attribute_match_eval(&strengths, &truth, &heldout, &eval)?;

    let mut csv = String::from("attribute_index,name,threshold,has_concept\n");
    for (j, name) in names.iter().enumerate() {
        let has = nodes.nodes.iter().any(|n| &n.name == name);
        let _ = writeln!(csv, "{j},{name},{},{has}", result.thresholds[j]);
    }
    write(inputs, "jaccard.csv", csv.as_bytes())?;

    let mut s = Summary::new(Command::EvalJaccard);
    s.add("heldout", heldout.len());
    s.add("evaluated", eval.len());
    s.add("min_alignment", fmt6(min_alignment));
    s.add("compound_nodes", nodes.nodes.len());
    s.add("never_positive_attributes", result.never_positive.len());
    s.add("mean_jaccard", fmt6(result.mean_jaccard));
    Ok(s)
}

fn cluster_cmd(inputs: &Inputs) -> Result<Summary> {
    let model = checkpoint(inputs)?;
    let features = image_features(inputs)?;
    let space = named_space(inputs, &model)?;
    let acts = concepts(&model, &features)?;
    let e = &inputs.config.eval;
    let report = cluster_concepts(
        &acts,
        &space,
        e.clusters,
        inputs.config.root_seed().derive("cluster"),
        e.cluster_top.min(model.h()),
    )?;
    write(inputs, "clusters.csv", &cluster_csv(&report)?)?;
    let mut members = String::from("sample_id,cluster\n");
    let mut assignment = vec![0; acts.n()];
    for (k, m) in report.members.iter().enumerate() {
        for &i in m {
            assignment[i] = k;
        }
    }
    for (i, k) in assignment.iter().enumerate() {
        let _ = writeln!(members, "{i},{k}");
    }
    write(inputs, "cluster_members.csv", members.as_bytes())?;

    let mut s = Summary::new(Command::Cluster);
    s.add("clusters", report.k);
    s.add("samples", acts.n());
    Ok(s)
}

#[derive(Debug, Serialize)]
struct Selection {
    criterion: &'static str,
    winner: usize,
    score: f64,
    checkpoint: String,
    runs: Vec<SweepRun>,
}

#[derive(Debug, Clone, Serialize)]
struct SweepRun {
    index: usize,
    lr: f64,
    lambda1: f64,
    expansion_factor: usize,
    checkpoint: String,
    heldout_recon_l2: f64,
    heldout_mean_active: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    zero_shot_accuracy: Option<f64>,
}

/// Class by highest cosine between each reconstruction and the class text
/// embeddings. A zero reconstruction scores every class 0 and so predicts
/// class 0.
fn zero_shot(recon: &Matrix, classes: &Matrix) -> Vec<usize> {
    let class_norms: Vec<f64> = classes.row_iter().map(norm).collect();
    recon
        .row_iter()
        .map(|r| {
            let rn = norm(r);
            let cos: Vec<f64> = classes
                .row_iter()
                .zip(&class_norms)
                .map(|(t, &tn)| {
                    if rn == 0.0 || tn == 0.0 {
                        0.0
                    } else {
                        dot(r, t) / (rn * tn)
                    }
                })
                .collect();
            argmax(&cos)
        })
        .collect()
}

/// Winner without class embeddings: lowest held-out reconstruction error
/// among runs at or below the median held-out `mean_active`.
fn select_by_reconstruction(runs: &[SweepRun]) -> usize {
    let mut active: Vec<f64> = runs.iter().map(|r| r.heldout_mean_active).collect();
    active.sort_by(f64::total_cmp);
    let median = active[(active.len() - 1) / 2];
    runs.iter()
        .filter(|r| r.heldout_mean_active <= median)
        .min_by(|a, b| {
            a.heldout_recon_l2
                .total_cmp(&b.heldout_recon_l2)
                .then(a.index.cmp(&b.index))
        })
        .map(|r| r.index)
        .expect("the median run is always eligible")
}

fn sweep_cmd(inputs: &Inputs) -> Result<Summary> {
    let features = image_features(inputs)?;
    let n = features.matrix.rows();
    let (heldout, train_rows) = split(inputs, n)?;
    if heldout.is_empty() || train_rows.is_empty() {
        return Err(Error::invalid(
            "sweep needs non-empty training and held-out splits",
        ));
    }
    let train = features.matrix.select_rows(&train_rows)?;
    let held = features.matrix.select_rows(&heldout)?;

    let zero_shot_inputs = match &inputs.text_embeddings {
        Some(path) => {
            let text = read_features(path)?;
            text.expect_kind(FeatureKind::TextEmbeddings)
                .map_err(|e| e.at(path))?;
            if text.matrix.cols() != features.matrix.cols() {
                return Err(Error::DimensionMismatch {
                    op: "text embeddings vs features",
                    left: text.matrix.shape(),
                    right: features.matrix.shape(),
                });
            }
            let all = labels(&features, inputs)?;
            let held_labels: Vec<usize> = heldout.iter().map(|&i| all[i]).collect();
            Some((text.matrix, held_labels))
        }
        None => None,
    };

    let mut runs = Vec::new();
    for (index, config) in inputs.config.sweep_configs().into_iter().enumerate() {
        let trained = train_sae(&train, &config)?;
        let model = trained.model.round_to_f32();
        let rel = format!("runs/run-{index:03}/sae.ckpt");
        let path = inputs.out.join(&rel);
        let dir = path.parent().expect("run path has a parent");
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_checkpoint(&path, &model)?;

        let loss = sae_loss(&model, &held, config.lambda1)?;
        let zero_shot_accuracy = match &zero_shot_inputs {
            Some((classes, labels)) => {
                let pred = zero_shot(&reconstruct(&model, &held)?, classes);
                Some(accuracy(&pred, labels)?)
            }
            None => None,
        };
        runs.push(SweepRun {
            index,
            lr: config.lr,
            lambda1: config.lambda1,
            expansion_factor: config.expansion_factor,
            checkpoint: rel,
            heldout_recon_l2: loss.recon_l2,
            heldout_mean_active: loss.mean_active,
            zero_shot_accuracy,
        });
    }

    let (criterion, winner, score) = if zero_shot_inputs.is_some() {
        let acc = |r: &SweepRun| r.zero_shot_accuracy.unwrap_or(f64::NEG_INFINITY);
        let w = runs
            .iter()
            .max_by(|a, b| acc(a).total_cmp(&acc(b)).then(b.index.cmp(&a.index)))
            .map(|r| r.index)
            .expect("grid is non-empty");
        (
            "zero_shot_accuracy",
            w,
            runs[w].zero_shot_accuracy.unwrap_or(0.0),
        )
    } else {
        let w = select_by_reconstruction(&runs);
        ("heldout_reconstruction", w, runs[w].heldout_recon_l2)
    };
    let selection = Selection {
        criterion,
        winner,
        score,
        checkpoint: runs[winner].checkpoint.clone(),
        runs: runs.clone(),
    };
    let text =
        toml::to_string(&selection).map_err(|e| Error::invalid(format!("selection: {e}")))?;
    write(inputs, "selection.toml", text.as_bytes())?;

    let mut s = Summary::new(Command::Sweep);
    s.add("grid_points", runs.len());
    s.add("heldout", heldout.len());
    s.add("criterion", criterion);
    s.add("winner", winner);
    s.add("score", score);
    s.add("checkpoint", &runs[winner].checkpoint);
    Ok(s)
}
