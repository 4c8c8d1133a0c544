// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! `dncbm`: train an SAE on image features, name its concepts, fit a sparse
//! concept-bottleneck probe and inspect it.
//!
//! On failure a single JSON object `{"error": {"kind", "message"}}` is
//! written to stderr and the process exits with status 1 (2 for usage
//! errors).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dncbm::io::RunConfig;
use dncbm::pipeline::{run, Command, Inputs};

#[derive(Debug, Parser)]
#[command(name = "dncbm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config's root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Image feature file.
    #[arg(long, global = true)]
    features: Option<PathBuf>,
    /// Vocabulary file; overrides `[vocab] path`.
    #[arg(long, global = true)]
    vocab: Option<PathBuf>,
    /// SAE checkpoint.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    /// Probe file.
    #[arg(long, global = true)]
    probe: Option<PathBuf>,
    /// Class-prompt text embeddings for zero-shot sweep selection.
    #[arg(long, global = true)]
    text_embeddings: Option<PathBuf>,
    /// Held-out sample indices, one per line.
    #[arg(long, global = true)]
    split: Option<PathBuf>,
    /// Group index per sample, one per line.
    #[arg(long, global = true)]
    groups: Option<PathBuf>,
    /// Binary attribute matrix (feature file).
    #[arg(long, global = true)]
    attributes: Option<PathBuf>,
    /// Attribute names, one per line.
    #[arg(long, global = true)]
    attribute_names: Option<PathBuf>,
    /// Intervention spec (TOML).
    #[arg(long, global = true)]
    intervention: Option<PathBuf>,
    /// Class names, one per line.
    #[arg(long, global = true)]
    class_names: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Train a sparse autoencoder on image features.
    TrainSae,
    /// Name every SAE concept after its closest vocabulary word.
    Name,
    /// Fit a sparse linear probe on concept activations.
    TrainProbe,
    /// Write per-sample and per-class concept contributions.
    Explain,
    /// Zero probe rows for a set of concepts.
    Intervene,
    /// Score compound nodes against ground-truth attributes.
    EvalJaccard,
    /// Overall and per-group probe accuracy.
    EvalAccuracy,
    /// k-means over concept activations.
    Cluster,
    /// Train the SAE hyperparameter grid and pick a winner on held-out data.
    Sweep,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::TrainSae => Command::TrainSae,
            Cmd::Name => Command::Name,
            Cmd::TrainProbe => Command::TrainProbe,
            Cmd::Explain => Command::Explain,
            Cmd::Intervene => Command::Intervene,
            Cmd::EvalJaccard => Command::EvalJaccard,
            Cmd::EvalAccuracy => Command::EvalAccuracy,
            Cmd::Cluster => Command::Cluster,
            Cmd::Sweep => Command::Sweep,
        }
    }
}

fn report(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{line}");
}

fn execute(cli: Cli) -> dncbm::Result<String> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli
        .out
        .ok_or_else(|| dncbm::Error::MissingInput("--out is required".into()))?;
    let inputs = Inputs {
        config,
        out,
        features: cli.features,
        vocab: cli.vocab,
        checkpoint: cli.checkpoint,
        probe: cli.probe,
        text_embeddings: cli.text_embeddings,
        split: cli.split,
        groups: cli.groups,
        attributes: cli.attributes,
        attribute_names: cli.attribute_names,
        intervention: cli.intervention,
        class_names: cli.class_names,
    };
    Ok(run(cli.command.into(), &inputs)?.render())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report("usage", e.to_string().trim());
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            report(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}
