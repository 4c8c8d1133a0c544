// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! Naming SAE latents after vocabulary words.
//!
//! Latent `c` is named by the word whose text embedding has the highest cosine
//! similarity with its dictionary vector (row `c` of `W_D`). Ties go to the
//! lowest vocabulary index.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numerics::{dot, norm, Matrix};
use crate::sae::{ConceptActivations, SaeModel};

/// Word list with unit-normalised text embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    embeddings: Matrix,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Rows of `embeddings` are normalised to unit length.
    pub fn new(words: Vec<String>, embeddings: Matrix) -> Result<Self> {
        let mut embeddings = embeddings;
        for i in 0..embeddings.rows() {
            let row = embeddings.row_mut(i);
            let len = norm(row);
            if len == 0.0 {
                return Err(Error::ZeroNorm {
                    op: "vocabulary embedding",
                    index: Some(i),
                });
            }
            row.iter_mut().for_each(|x| *x /= len);
        }
        Self::from_unit_rows(words, embeddings)
    }

    /// Rows are taken as already normalised.
    fn from_unit_rows(words: Vec<String>, embeddings: Matrix) -> Result<Self> {
        if words.len() != embeddings.rows() {
            return Err(Error::invalid(format!(
                "{} words but {} embedding rows",
                words.len(),
                embeddings.rows()
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary word {w:?}")));
            }
        }
        Ok(Self {
            words,
            embeddings,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn embeddings(&self) -> &Matrix {
        &self.embeddings
    }

    pub fn position(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedConcept {
    pub name: String,
    pub name_index: usize,
    /// Cosine between the dictionary vector and the chosen word's embedding.
    pub alignment: f64,
    pub dictionary: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedConceptSpace {
    pub concepts: Vec<NamedConcept>,
}

impl NamedConceptSpace {
    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn name(&self, c: usize) -> &str {
        &self.concepts[c].name
    }

    pub fn alignments(&self) -> Vec<f64> {
        self.concepts.iter().map(|c| c.alignment).collect()
    }

    /// Concepts carrying `name`, ascending.
    pub fn concepts_named(&self, name: &str) -> Vec<usize> {
        self.concepts
            .iter()
            .enumerate()
            .filter(|(_, c)| c.name == name)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Row `c` of the decoder.
pub fn dictionary_vector(model: &SaeModel, c: usize) -> Result<&[f64]> {
    if c >= model.h() {
        return Err(Error::IndexOutOfRange {
            what: "SAE latents",
            index: c,
            len: model.h(),
        });
    }
    Ok(model.decoder().row(c))
}

pub fn assign_names(model: &SaeModel, vocab: &Vocabulary) -> Result<NamedConceptSpace> {
    assign_names_with(Exec::default(), model, vocab)
}

pub fn assign_names_with(
    exec: Exec,
    model: &SaeModel,
    vocab: &Vocabulary,
) -> Result<NamedConceptSpace> {
    if vocab.dim() != model.d() {
        return Err(Error::DimensionMismatch {
            op: "assign_names",
            left: vocab.embeddings.shape(),
            right: model.decoder().shape(),
        });
    }
    if vocab.is_empty() {
        return Err(Error::invalid(
            "cannot name concepts with an empty vocabulary",
        ));
    }
    let decoder = model.decoder();
    if let Some(c) = (0..model.h()).find(|&c| norm(decoder.row(c)) == 0.0) {
        return Err(Error::ZeroNorm {
            op: "assign_names: dictionary vector",
            index: Some(c),
        });
    }
    let vocab_norms: Vec<f64> = vocab.embeddings.row_iter().map(norm).collect();
    let concepts = exec.map(model.h(), |c| {
        let p = decoder.row(c);
        let p_norm = norm(p);
        let mut best = (0, f64::NEG_INFINITY);
        for (v, e) in vocab.embeddings.row_iter().enumerate() {
            let cos = (dot(p, e) / (p_norm * vocab_norms[v])).clamp(-1.0, 1.0);
            if cos > best.1 {
                best = (v, cos);
            }
        }
        NamedConcept {
            name: vocab.words[best.0].clone(),
            name_index: best.0,
            alignment: best.1,
            dictionary: p.to_vec(),
        }
    });
    Ok(NamedConceptSpace { concepts })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentBins {
    pub high: Vec<usize>,
    pub mid: Vec<usize>,
    pub low: Vec<usize>,
}

/// Split concepts into the `hi` best aligned, the `lo` worst aligned and the
/// rest. Each bin lists concepts by descending alignment.
pub fn alignment_partition(
    space: &NamedConceptSpace,
    hi: usize,
    lo: usize,
) -> Result<AlignmentBins> {
    let h = space.len();
    if hi + lo > h {
        return Err(Error::invalid(format!(
            "bins of {hi} + {lo} exceed {h} concepts"
        )));
    }
    let mut order: Vec<usize> = (0..h).collect();
    order.sort_by(|&a, &b| {
        space.concepts[b]
            .alignment
            .total_cmp(&space.concepts[a].alignment)
            .then(a.cmp(&b))
    });
    let low = order.split_off(h - lo);
    let mid = order.split_off(hi);
    Ok(AlignmentBins {
        high: order,
        mid,
        low,
    })
}

/// Remove `remove`, then append `add` (embeddings normalised).
pub fn vocabulary_edit(
    vocab: &Vocabulary,
    add: &[(String, Vec<f64>)],
    remove: &[String],
) -> Result<Vocabulary> {
    let mut drop = vec![false; vocab.len()];
    for w in remove {
        let i = vocab
            .position(w)
            .ok_or_else(|| Error::invalid(format!("cannot remove unknown word {w:?}")))?;
        drop[i] = true;
    }
    let mut words = Vec::with_capacity(vocab.len() + add.len());
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(vocab.len() + add.len());
    for (i, w) in vocab.words.iter().enumerate() {
        if !drop[i] {
            words.push(w.clone());
            rows.push(vocab.embeddings.row(i).to_vec());
        }
    }
    for (w, e) in add {
        if words.contains(w) {
            return Err(Error::invalid(format!(
                "word {w:?} is already in the vocabulary"
            )));
        }
        if e.len() != vocab.dim() {
            return Err(Error::DimensionMismatch {
                op: "vocabulary_edit",
                left: (1, e.len()),
                right: vocab.embeddings.shape(),
            });
        }
        let len = norm(e);
        if len == 0.0 {
            return Err(Error::ZeroNorm {
                op: "vocabulary_edit",
                index: Some(words.len()),
            });
        }
        words.push(w.clone());
        rows.push(e.iter().map(|x| x / len).collect());
    }
    let embeddings = if rows.is_empty() {
        Matrix::zeros(0, vocab.dim())
    } else {
        Matrix::from_rows(&rows)?
    };
    Vocabulary::from_unit_rows(words, embeddings)
}

/// Latents merged by shared name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompoundNode {
    pub name: String,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompoundNodes {
    pub nodes: Vec<CompoundNode>,
    /// `N×|nodes|`: per sample, the maximum activation over each node's members.
    pub strengths: Matrix,
}

/// Drop concepts aligned below `min_alignment` or never active, group the
/// survivors by name and take the max member activation per sample. Nodes
/// are ordered by their lowest member index.
pub fn merge_compound_nodes(
    space: &NamedConceptSpace,
    activations: &ConceptActivations,
    min_alignment: f64,
) -> Result<CompoundNodes> {
    if min_alignment.is_nan() {
        return Err(Error::invalid("min_alignment is NaN"));
    }
    if activations.h() != space.len() {
        return Err(Error::DimensionMismatch {
            op: "merge_compound_nodes",
            left: activations.values().shape(),
            right: (space.len(), 1),
        });
    }
    let n = activations.n();
    let mut ever_active = vec![false; space.len()];
    for i in 0..n {
        for (a, &z) in ever_active.iter_mut().zip(activations.row(i)) {
            *a |= z > 0.0;
        }
    }
    let mut nodes: Vec<CompoundNode> = Vec::new();
    let mut by_name: HashMap<&str, usize> = HashMap::new();
    for (c, concept) in space.concepts.iter().enumerate() {
        if concept.alignment < min_alignment || !ever_active[c] {
            continue;
        }
        match by_name.get(concept.name.as_str()) {
            Some(&k) => nodes[k].members.push(c),
            None => {
                by_name.insert(&concept.name, nodes.len());
                nodes.push(CompoundNode {
                    name: concept.name.clone(),
                    members: vec![c],
                });
            }
        }
    }
    let mut strengths = Matrix::zeros(n, nodes.len());
    for i in 0..n {
        let row = activations.row(i);
        for (k, node) in nodes.iter().enumerate() {
            let s = node.members.iter().map(|&c| row[c]).fold(0.0, f64::max);
            strengths.set(i, k, s);
        }
    }
    Ok(CompoundNodes { nodes, strengths })
}
