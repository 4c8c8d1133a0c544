// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! Accuracy, group accuracy, attribute-level Jaccard scoring and clustering
//! in concept space.

use rand::seq::SliceRandom;

use crate::cbm::LabeledActivations;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::naming::{merge_compound_nodes, CompoundNodes, NamedConceptSpace};
use crate::numerics::{kmeans_fit_with, Matrix, RngSeed};
use crate::sae::ConceptActivations;

/// Lloyd iteration cap used by [`cluster_concepts`].
pub const KMEANS_MAX_ITERS: usize = 300;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JaccardCounts {
    /// True positives.
    pub m11: usize,
    /// False negatives.
    pub m10: usize,
    /// False positives.
    pub m01: usize,
}

impl JaccardCounts {
    pub fn from_sets(predicted: &[bool], truth: &[bool]) -> Self {
        let mut c = JaccardCounts::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (t, p) {
                (true, true) => c.m11 += 1,
                (true, false) => c.m10 += 1,
                (false, true) => c.m01 += 1,
                (false, false) => {}
            }
        }
        c
    }
}

/// `m11 / (m11 + m10 + m01)`, or 1 when the union is empty.
pub fn jaccard(counts: JaccardCounts) -> f64 {
    let union = counts.m11 + counts.m10 + counts.m01;
    if union == 0 {
        return 1.0;
    }
    counts.m11 as f64 / union as f64
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::invalid("accuracy over zero samples"));
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Labelled activations with a group index per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDataset {
    pub data: LabeledActivations,
    groups: Vec<usize>,
    group_count: usize,
}

impl GroupedDataset {
    pub fn new(data: LabeledActivations, groups: Vec<usize>, group_count: usize) -> Result<Self> {
        if groups.len() != data.n() {
            return Err(Error::invalid(format!(
                "{} group indices for {} samples",
                groups.len(),
                data.n()
            )));
        }
        if let Some(&g) = groups.iter().find(|&&g| g >= group_count) {
            return Err(Error::IndexOutOfRange {
                what: "groups",
                index: g,
                len: group_count,
            });
        }
        Ok(Self {
            data,
            groups,
            group_count,
        })
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn group_count(&self) -> usize {
        self.group_count
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupAccuracy {
    pub per_group: Vec<f64>,
    pub sizes: Vec<usize>,
    pub overall: f64,
}

impl GroupAccuracy {
    pub fn worst_group(&self) -> f64 {
        self.per_group.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn group_accuracy(data: &GroupedDataset, predictions: &[usize]) -> Result<GroupAccuracy> {
    let labels = data.data.labels();
    let overall = accuracy(predictions, labels)?;
    let mut hits = vec![0usize; data.group_count];
    let mut sizes = vec![0usize; data.group_count];
    for ((&g, p), l) in data.groups.iter().zip(predictions).zip(labels) {
        sizes[g] += 1;
        if p == l {
            hits[g] += 1;
        }
    }
    if let Some(g) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::invalid(format!("group {g} is empty")));
    }
    Ok(GroupAccuracy {
        per_group: hits
            .iter()
            .zip(&sizes)
            .map(|(&h, &s)| h as f64 / s as f64)
            .collect(),
        sizes,
        overall,
    })
}

/// Threshold maximising `F1 = 2TP / (2TP + FP + FN)` for the rule
/// `strength > threshold`.
///
/// Candidates are 0 and every positive midpoint between consecutive distinct
/// strengths, so a zero strength is never predicted present. Ties go to the
/// largest threshold. Returns `+∞` when `truth` has no positives.
pub fn select_threshold(strengths: &[f64], truth: &[bool]) -> f64 {
    let positives = truth.iter().filter(|&&t| t).count();
    if positives == 0 {
        return f64::INFINITY;
    }
    let mut pairs: Vec<(f64, bool)> = strengths
        .iter()
        .copied()
        .zip(truth.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let above_zero = |t: bool| pairs.iter().filter(|p| p.0 > 0.0 && p.1 == t).count();
    let mut best = (0.0, above_zero(true), above_zero(false));
    // Walk the cut upwards from below the smallest strength.
    let (mut tp, mut fp) = (positives, pairs.len() - positives);
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == v {
            if pairs[i].1 {
                tp -= 1;
            } else {
                fp -= 1;
            }
            i += 1;
        }
        if i == pairs.len() {
            break;
        }
        let next = pairs[i].0;
        let mut mid = v + (next - v) / 2.0;
        if mid >= next {
            mid = v;
        }
        if mid <= 0.0 {
            continue;
        }
        // F1 = 2tp / (tp + P + fp); compare fractions exactly.
        let lhs = (tp as u128) * (best.1 + positives + best.2) as u128;
        let rhs = (best.1 as u128) * (tp + positives + fp) as u128;
        if lhs >= rhs {
            best = (mid, tp, fp);
        }
    }
    best.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeMatch {
    /// Mean per-image Jaccard over the evaluation split.
    pub mean_jaccard: f64,
    /// Selected threshold per attribute.
    pub thresholds: Vec<f64>,
    /// Attributes with no held-out positives (threshold `+∞`).
    pub never_positive: Vec<usize>,
}

pub fn attribute_match_eval(
    strengths: &Matrix,
    truth: &Matrix,
    heldout: &[usize],
    eval: &[usize],
) -> Result<AttributeMatch> {
    attribute_match_eval_with(Exec::default(), strengths, truth, heldout, eval)
}

/// Pick a per-attribute threshold on `heldout`, binarise the `eval` rows and
/// average the per-image Jaccard index against `truth`.
pub fn attribute_match_eval_with(
    exec: Exec,
    strengths: &Matrix,
    truth: &Matrix,
    heldout: &[usize],
    eval: &[usize],
) -> Result<AttributeMatch> {
    if strengths.shape() != truth.shape() {
        return Err(Error::DimensionMismatch {
            op: "attribute_match_eval",
            left: strengths.shape(),
            right: truth.shape(),
        });
    }
    if truth.data().iter().any(|&x| x != 0.0 && x != 1.0) {
        return Err(Error::invalid("ground-truth attributes must be 0 or 1"));
    }
    if strengths.data().iter().any(|&x| x < 0.0) {
        return Err(Error::invalid("attribute strengths must be non-negative"));
    }
    let n = strengths.rows();
    let mut seen = vec![0u8; n];
    for (split, bit) in [(heldout, 1u8), (eval, 2u8)] {
        for &i in split {
            if i >= n {
                return Err(Error::IndexOutOfRange {
                    what: "samples",
                    index: i,
                    len: n,
                });
            }
            seen[i] |= bit;
        }
    }
    if seen.contains(&3) {
        return Err(Error::invalid("held-out and evaluation splits overlap"));
    }
    if eval.is_empty() {
        return Err(Error::invalid("empty evaluation split"));
    }

    let c = strengths.cols();
    let thresholds = exec.map(c, |j| {
        let values: Vec<f64> = heldout.iter().map(|&i| strengths.get(i, j)).collect();
        let gt: Vec<bool> = heldout.iter().map(|&i| truth.get(i, j) == 1.0).collect();
        select_threshold(&values, &gt)
    });
    let scores = exec.map(eval.len(), |r| {
        let i = eval[r];
        let predicted: Vec<bool> = (0..c)
            .map(|j| strengths.get(i, j) > thresholds[j])
            .collect();
        let gt: Vec<bool> = truth.row(i).iter().map(|&t| t == 1.0).collect();
        jaccard(JaccardCounts::from_sets(&predicted, &gt))
    });
    let never_positive = (0..c).filter(|&j| thresholds[j] == f64::INFINITY).collect();
    Ok(AttributeMatch {
        mean_jaccard: scores.iter().sum::<f64>() / eval.len() as f64,
        thresholds,
        never_positive,
    })
}

/// Compound-node strengths laid out by attribute: column `j` holds the node
/// named `attributes[j]`, or zeros if no concept carries that name.
pub fn attribute_strengths(nodes: &CompoundNodes, attributes: &[String]) -> Matrix {
    let n = nodes.strengths.rows();
    let mut out = Matrix::zeros(n, attributes.len());
    for (j, name) in attributes.iter().enumerate() {
        if let Some(node) = nodes.nodes.iter().position(|nd| &nd.name == name) {
            out.set_column(j, &nodes.strengths.column(node));
        }
    }
    out
}

/// Alignment filter for compound nodes that maximises the mean per-image
/// Jaccard on `heldout`, with thresholds also fitted there.
///
/// Candidates are −1 (no filter) and every alignment of a concept named
/// after an attribute. Ties go to the lowest filter.
pub fn select_min_alignment(
    space: &NamedConceptSpace,
    activations: &ConceptActivations,
    attributes: &[String],
    truth: &Matrix,
    heldout: &[usize],
) -> Result<f64> {
    if truth.shape() != (activations.n(), attributes.len()) {
        return Err(Error::DimensionMismatch {
            op: "select_min_alignment",
            left: truth.shape(),
            right: (activations.n(), attributes.len()),
        });
    }
    let mut candidates: Vec<f64> = space
        .concepts
        .iter()
        .filter(|c| attributes.contains(&c.name))
        .map(|c| c.alignment)
        .collect();
    candidates.push(-1.0);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    if heldout.is_empty() {
        return Ok(-1.0);
    }
    let rows = truth.select_rows(heldout)?;
    let gt: Vec<Vec<bool>> = rows
        .row_iter()
        .map(|r| r.iter().map(|&t| t == 1.0).collect())
        .collect();
    let mut best = (f64::NEG_INFINITY, -1.0);
    for &min_alignment in &candidates {
        let nodes = merge_compound_nodes(space, activations, min_alignment)?;
        let strengths = attribute_strengths(&nodes, attributes).select_rows(heldout)?;
        let thresholds: Vec<f64> = (0..attributes.len())
            .map(|j| {
                let truth_j: Vec<bool> = gt.iter().map(|r| r[j]).collect();
                select_threshold(&strengths.column(j), &truth_j)
            })
            .collect();
        let score: f64 = strengths
            .row_iter()
            .zip(&gt)
            .map(|(s, g)| {
                let predicted: Vec<bool> = s.iter().zip(&thresholds).map(|(v, t)| v > t).collect();
                jaccard(JaccardCounts::from_sets(&predicted, g))
            })
            .sum::<f64>()
            / heldout.len() as f64;
        if score > best.0 {
            best = (score, min_alignment);
        }
    }
    Ok(best.1)
}

/// Shuffle `0..n` with `seed` and split off the first `round(fraction·n)`
/// indices as the held-out set. Both halves are returned sorted.
pub fn seeded_split(n: usize, fraction: f64, seed: RngSeed) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!(
            "held-out fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed.rng());
    let cut = (fraction * n as f64).round() as usize;
    let mut heldout = order[..cut].to_vec();
    let mut rest = order[cut..].to_vec();
    heldout.sort_unstable();
    rest.sort_unstable();
    Ok((heldout, rest))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidConcept {
    pub concept: usize,
    pub name: String,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    pub k: usize,
    /// `k×h`.
    pub centroids: Matrix,
    /// Per cluster, the strongest centroid coordinates, descending.
    pub top_concepts: Vec<Vec<CentroidConcept>>,
    /// Per cluster, member sample indices ascending.
    pub members: Vec<Vec<usize>>,
}

pub fn cluster_concepts(
    activations: &ConceptActivations,
    space: &NamedConceptSpace,
    k: usize,
    seed: RngSeed,
    top: usize,
) -> Result<ClusterReport> {
    cluster_concepts_with(Exec::default(), activations, space, k, seed, top)
}

/// k-means over activation rows, reporting each centroid's strongest concepts.
pub fn cluster_concepts_with(
    exec: Exec,
    activations: &ConceptActivations,
    space: &NamedConceptSpace,
    k: usize,
    seed: RngSeed,
    top: usize,
) -> Result<ClusterReport> {
    let h = activations.h();
    if space.len() != h {
        return Err(Error::invalid(format!(
            "{} named concepts for activations of width {h}",
            space.len()
        )));
    }
    let fit = kmeans_fit_with(exec, activations.values(), k, seed, KMEANS_MAX_ITERS)?;
    let mut members = vec![Vec::new(); k];
    for (i, &a) in fit.assignment.iter().enumerate() {
        members[a].push(i);
    }
    let top_concepts = fit
        .centroids
        .row_iter()
        .map(|centroid| {
            let mut order: Vec<usize> = (0..h).collect();
            order.sort_by(|&a, &b| centroid[b].total_cmp(&centroid[a]).then(a.cmp(&b)));
            order
                .into_iter()
                .take(top)
                .map(|c| CentroidConcept {
                    concept: c,
                    name: space.name(c).to_string(),
                    strength: centroid[c],
                })
                .collect()
        })
        .collect();
    Ok(ClusterReport {
        k,
        centroids: fit.centroids,
        top_concepts,
        members,
    })
}
