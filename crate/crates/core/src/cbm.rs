// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! Concept-bottleneck classifier.
//!
//! A bias-free linear probe `ω` (h×K) maps non-negative concept activations
//! to class logits. Because there is no bias, every logit decomposes exactly
//! into per-concept contributions `ω[c, k] · act[c]`, which is what the
//! explanation, intervention and sparsity tools below are built on.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::naming::NamedConceptSpace;
use crate::numerics::matrix::row_times_matrix;
use crate::numerics::{argmax, log_sum_exp, matmul_with, AdamState, Matrix, RngSeed};
use crate::sae::{ConceptActivations, CHUNK};

/// Datasets up to this size are trained full-batch.
pub const FULL_BATCH_LIMIT: usize = 65536;
/// Minibatch size above [`FULL_BATCH_LIMIT`].
pub const PROBE_BATCH: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct CbmProbe {
    weights: Matrix,
    class_names: Vec<String>,
    lambda2: f64,
}

impl CbmProbe {
    pub fn new(weights: Matrix, class_names: Vec<String>, lambda2: f64) -> Result<Self> {
        if weights.cols() < 2 {
            return Err(Error::invalid("a probe needs at least two classes"));
        }
        if class_names.len() != weights.cols() {
            return Err(Error::invalid(format!(
                "{} class names for {} weight columns",
                class_names.len(),
                weights.cols()
            )));
        }
        if !weights.is_finite() {
            return Err(Error::NonFinite("probe weights".into()));
        }
        if !(lambda2 >= 0.0 && lambda2.is_finite()) {
            return Err(Error::invalid("lambda2 must be finite and >= 0"));
        }
        Ok(Self {
            weights,
            class_names,
            lambda2,
        })
    }

    /// Number of concepts.
    pub fn h(&self) -> usize {
        self.weights.rows()
    }

    /// Number of classes.
    pub fn k(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// Number of non-zero weights in column `class`.
    pub fn nonzero_in_class(&self, class: usize) -> usize {
        (0..self.h())
            .filter(|&c| self.weights.get(c, class) != 0.0)
            .count()
    }

    /// `‖ω‖₁`.
    pub fn l1_norm(&self) -> f64 {
        self.weights.data().iter().map(|w| w.abs()).sum()
    }

    fn with_weights(&self, weights: Matrix) -> CbmProbe {
        CbmProbe {
            weights,
            class_names: self.class_names.clone(),
            lambda2: self.lambda2,
        }
    }

    fn check_width(&self, op: &'static str, h: usize) -> Result<()> {
        if h != self.h() {
            return Err(Error::DimensionMismatch {
                op,
                left: (1, h),
                right: self.weights.shape(),
            });
        }
        Ok(())
    }
}

/// Concept activations paired with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledActivations {
    activations: ConceptActivations,
    labels: Vec<usize>,
}

impl LabeledActivations {
    pub fn new(activations: ConceptActivations, labels: Vec<usize>) -> Result<Self> {
        if activations.n() != labels.len() {
            return Err(Error::invalid(format!(
                "{} activation rows but {} labels",
                activations.n(),
                labels.len()
            )));
        }
        Ok(Self {
            activations,
            labels,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn h(&self) -> usize {
        self.activations.h()
    }

    pub fn activations(&self) -> &ConceptActivations {
        &self.activations
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn check_labels(&self, k: usize) -> Result<()> {
        match self.labels.iter().find(|&&y| y >= k) {
            Some(&y) => Err(Error::IndexOutOfRange {
                what: "class labels",
                index: y,
                len: k,
            }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub lambda2: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Only used to shuffle minibatches; weights start at zero.
    pub seed: RngSeed,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            lambda2: 0.1,
            lr: 1e-3,
            epochs: 200,
            seed: RngSeed(0),
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return Err(Error::invalid("lambda2 must be finite and >= 0"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("probe lr must be finite and > 0"));
        }
        if self.epochs < 1 {
            return Err(Error::invalid("probe epochs must be >= 1"));
        }
        Ok(())
    }
}

/// Mean cross-entropy plus `λ₂‖ω‖₁`.
pub fn probe_objective(probe: &CbmProbe, data: &LabeledActivations) -> Result<f64> {
    probe.check_width("probe_objective", data.h())?;
    data.check_labels(probe.k())?;
    let idx: Vec<usize> = (0..data.n()).collect();
    let (ce, _) = ce_and_grad(Exec::Sequential, &probe.weights, data, &idx);
    Ok(ce + probe.lambda2 * probe.l1_norm())
}

/// Gradient of [`probe_objective`] over the samples `idx`, with subgradient 0
/// at `ω = 0`.
pub(crate) fn probe_grad(
    exec: Exec,
    weights: &Matrix,
    lambda2: f64,
    data: &LabeledActivations,
    idx: &[usize],
) -> (f64, Matrix) {
    let (ce, mut grad) = ce_and_grad(exec, weights, data, idx);
    if lambda2 != 0.0 {
        for (g, &w) in grad.data_mut().iter_mut().zip(weights.data()) {
            if w != 0.0 {
                *g += lambda2 * w.signum();
            }
        }
    }
    (ce, grad)
}

/// Mean cross-entropy over `idx` and its gradient.
fn ce_and_grad(
    exec: Exec,
    weights: &Matrix,
    data: &LabeledActivations,
    idx: &[usize],
) -> (f64, Matrix) {
    let (h, k) = weights.shape();
    let parts = exec.map_ranges(idx.len(), CHUNK, |range| {
        let mut grad = Matrix::zeros(h, k);
        let mut loss = 0.0;
        let mut p = vec![0.0; k];
        for &i in &idx[range] {
            let x = data.activations.row(i);
            let y = data.labels[i];
            p.iter_mut().for_each(|v| *v = 0.0);
            row_times_matrix(x, weights, &mut p);
            let lse = log_sum_exp(&p);
            loss += lse - p[y];
            p.iter_mut().for_each(|v| *v = (*v - lse).exp());
            p[y] -= 1.0;
            for (c, &xc) in x.iter().enumerate() {
                if xc == 0.0 {
                    continue;
                }
                for (g, &pk) in grad.row_mut(c).iter_mut().zip(&p) {
                    *g += xc * pk;
                }
            }
        }
        (loss, grad)
    });
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(h, k);
    for (l, g) in parts {
        loss += l;
        for (a, b) in grad.data_mut().iter_mut().zip(g.data()) {
            *a += b;
        }
    }
    let inv = 1.0 / idx.len().max(1) as f64;
    grad.data_mut().iter_mut().for_each(|g| *g *= inv);
    (loss * inv, grad)
}

pub fn train_probe(
    data: &LabeledActivations,
    class_names: Vec<String>,
    config: &ProbeConfig,
) -> Result<CbmProbe> {
    train_probe_with(Exec::default(), data, class_names, config)
}

/// Adam from zero weights on mean cross-entropy plus `λ₂‖ω‖₁`.
///
/// Full-batch up to [`FULL_BATCH_LIMIT`] samples, shuffled minibatches of
/// [`PROBE_BATCH`] beyond that.
pub fn train_probe_with(
    exec: Exec,
    data: &LabeledActivations,
    class_names: Vec<String>,
    config: &ProbeConfig,
) -> Result<CbmProbe> {
    config.validate()?;
    let k = class_names.len();
    if k < 2 {
        return Err(Error::invalid("a probe needs at least two classes"));
    }
    let n = data.n();
    if n == 0 {
        return Err(Error::invalid("cannot train a probe on an empty dataset"));
    }
    data.check_labels(k)?;
    if data.labels.iter().all(|&y| y == data.labels[0]) {
        return Err(Error::invalid(
            "degenerate dataset: every sample has the same label",
        ));
    }
    if !data.activations.values().is_finite() {
        return Err(Error::NonFinite("probe training activations".into()));
    }

    let h = data.h();
    let mut weights = Matrix::zeros(h, k);
    let mut adam = AdamState::new(h, k, config.lr);
    let mut rng = config.seed.rng();
    let mut order: Vec<usize> = (0..n).collect();
    let batch = if n <= FULL_BATCH_LIMIT {
        n
    } else {
        PROBE_BATCH
    };

    for epoch in 1..=config.epochs {
        if batch < n {
            order.shuffle(&mut rng);
        }
        for idx in order.chunks(batch) {
            let (loss, grad) = probe_grad(exec, &weights, config.lambda2, data, idx);
            if !loss.is_finite() || !grad.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            adam.update(&mut weights, &grad)?;
        }
        if !weights.is_finite() {
            return Err(Error::Diverged { epoch });
        }
    }
    CbmProbe::new(weights, class_names, config.lambda2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `N×K`.
    pub logits: Matrix,
    pub classes: Vec<usize>,
}

pub fn predict(probe: &CbmProbe, activations: &ConceptActivations) -> Result<Prediction> {
    predict_with(Exec::default(), probe, activations)
}

/// Logits `act × ω`; class is the per-row argmax, ties to the lowest index.
pub fn predict_with(
    exec: Exec,
    probe: &CbmProbe,
    activations: &ConceptActivations,
) -> Result<Prediction> {
    probe.check_width("predict", activations.h())?;
    let logits = matmul_with(exec, activations.values(), &probe.weights)?;
    let classes = logits.row_iter().map(argmax).collect();
    Ok(Prediction { logits, classes })
}

/// Keep the `k` largest-magnitude weights of every class; ties keep the
/// lower concept index.
pub fn prune_topk(probe: &CbmProbe, k: usize) -> Result<CbmProbe> {
    let h = probe.h();
    if k == 0 {
        return Err(Error::invalid("prune_topk needs k >= 1"));
    }
    if k > h {
        return Err(Error::invalid(format!(
            "prune_topk: k = {k} exceeds h = {h}"
        )));
    }
    let mut weights = Matrix::zeros(h, probe.k());
    for class in 0..probe.k() {
        let column = probe.weights.column(class);
        let mut order: Vec<usize> = (0..h).collect();
        order.sort_by(|&a, &b| column[b].abs().total_cmp(&column[a].abs()).then(a.cmp(&b)));
        for &c in &order[..k] {
            weights.set(c, class, column[c]);
        }
    }
    Ok(probe.with_weights(weights))
}

/// Per-concept contributions `ω[c, class] · act[c]` in concept order.
pub fn contributions(probe: &CbmProbe, activation: &[f64], class: usize) -> Result<Vec<f64>> {
    probe.check_width("contributions", activation.len())?;
    if class >= probe.k() {
        return Err(Error::IndexOutOfRange {
            what: "classes",
            index: class,
            len: probe.k(),
        });
    }
    Ok(activation
        .iter()
        .enumerate()
        .map(|(c, &a)| probe.weights.get(c, class) * a)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub concept: usize,
    pub name: String,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub prediction: usize,
    /// Predicted-class logit.
    pub logit: f64,
    /// Top contributors, descending; ties list the lower concept first.
    pub entries: Vec<Contribution>,
}

fn ranked(space: &NamedConceptSpace, values: &[f64], top: usize) -> Vec<Contribution> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
        .into_iter()
        .take(top)
        .map(|c| Contribution {
            concept: c,
            name: space.name(c).to_string(),
            contribution: values[c],
        })
        .collect()
}

fn check_space(probe: &CbmProbe, space: &NamedConceptSpace, top: usize) -> Result<()> {
    if space.len() != probe.h() {
        return Err(Error::invalid(format!(
            "{} named concepts for a probe over {} concepts",
            space.len(),
            probe.h()
        )));
    }
    if top > probe.h() {
        return Err(Error::invalid(format!(
            "top = {top} exceeds h = {}",
            probe.h()
        )));
    }
    Ok(())
}

/// The `top` concepts contributing most to the predicted class of one sample.
pub fn explain_local(
    probe: &CbmProbe,
    space: &NamedConceptSpace,
    activation: &[f64],
    top: usize,
) -> Result<Explanation> {
    check_space(probe, space, top)?;
    probe.check_width("explain_local", activation.len())?;
    let mut logits = vec![0.0; probe.k()];
    row_times_matrix(activation, &probe.weights, &mut logits);
    let prediction = argmax(&logits);
    let values = contributions(probe, activation, prediction)?;
    Ok(Explanation {
        prediction,
        logit: logits[prediction],
        entries: ranked(space, &values, top),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalExplanation {
    pub class: usize,
    /// Number of samples of `class` averaged over.
    pub samples: usize,
    pub entries: Vec<Contribution>,
}

/// Concepts ranked by their mean contribution to `class` over the samples
/// labelled `class`.
pub fn explain_global(
    probe: &CbmProbe,
    space: &NamedConceptSpace,
    data: &LabeledActivations,
    class: usize,
    top: usize,
) -> Result<GlobalExplanation> {
    check_space(probe, space, top)?;
    probe.check_width("explain_global", data.h())?;
    if class >= probe.k() {
        return Err(Error::IndexOutOfRange {
            what: "classes",
            index: class,
            len: probe.k(),
        });
    }
    let members: Vec<usize> = (0..data.n()).filter(|&i| data.labels[i] == class).collect();
    if members.is_empty() {
        return Err(Error::invalid(format!("class {class} has no samples")));
    }
    let mut mean = vec![0.0; probe.h()];
    for &i in &members {
        for (m, &a) in mean.iter_mut().zip(data.activations.row(i)) {
            *m += a;
        }
    }
    let count = members.len() as f64;
    for (c, m) in mean.iter_mut().enumerate() {
        *m = probe.weights.get(c, class) * (*m / count);
    }
    Ok(GlobalExplanation {
        class,
        samples: members.len(),
        entries: ranked(space, &mean, top),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterventionMode {
    KeepOnly,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterventionSpec {
    pub mode: InterventionMode,
    pub concepts: Vec<usize>,
}

/// Zero whole weight rows: those outside `spec.concepts` for keep-only, those
/// inside it for remove.
pub fn intervene(probe: &CbmProbe, spec: &InterventionSpec) -> Result<CbmProbe> {
    let h = probe.h();
    let mut selected = vec![false; h];
    for &c in &spec.concepts {
        if c >= h {
            return Err(Error::IndexOutOfRange {
                what: "concepts",
                index: c,
                len: h,
            });
        }
        selected[c] = true;
    }
    let mut weights = probe.weights.clone();
    for (c, &sel) in selected.iter().enumerate() {
        let zero = match spec.mode {
            InterventionMode::KeepOnly => !sel,
            InterventionMode::Remove => sel,
        };
        if zero {
            weights.row_mut(c).iter_mut().for_each(|w| *w = 0.0);
        }
    }
    Ok(probe.with_weights(weights))
}

/// Smallest `m` such that the `m` largest contributions sum to at least
/// `fraction` of their total. Sums are compared with a relative slack of
/// `1e-12 · Σ|c|` so that reordering round-off cannot add a concept.
pub fn min_prefix_count(contributions: &[f64], fraction: f64) -> usize {
    let mut sorted = contributions.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = contributions.iter().sum();
    let slack = 1e-12 * contributions.iter().map(|c| c.abs()).sum::<f64>();
    let target = fraction * total - slack;
    let mut acc = 0.0;
    for (i, c) in sorted.iter().enumerate() {
        acc += c;
        if acc >= target {
            return i + 1;
        }
    }
    sorted.len()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityReport {
    /// Mean count over the counted samples; `None` if none were counted.
    pub mean: Option<f64>,
    pub counted: usize,
    /// Samples whose predicted-class logit is not positive.
    pub excluded: usize,
}

/// Mean number of top concepts needed to reach `fraction` of the
/// predicted-class logit.
pub fn sparsity_of_decision(
    probe: &CbmProbe,
    activations: &ConceptActivations,
    fraction: f64,
) -> Result<SparsityReport> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let pred = predict_with(Exec::Sequential, probe, activations)?;
    let mut total = 0usize;
    let mut counted = 0usize;
    for i in 0..activations.n() {
        let class = pred.classes[i];
        if pred.logits.get(i, class) <= 0.0 {
            continue;
        }
        let values = contributions(probe, activations.row(i), class)?;
        total += min_prefix_count(&values, fraction);
        counted += 1;
    }
    Ok(SparsityReport {
        mean: (counted > 0).then(|| total as f64 / counted as f64),
        counted,
        excluded: activations.n() - counted,
    })
}
