// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! Bias-free sparse autoencoder.
//!
//! `SAE(a) = W_Dᵀ · ReLU(W_Eᵀ · a)` with `W_E: d×h` and `W_D: h×d`, trained
//! on `‖SAE(a) − a‖² + λ₁‖ReLU(W_Eᵀ a)‖₁` averaged over samples. Row `c` of
//! `W_D` is the dictionary vector of latent `c`.
//!
//! Batch kernels split samples into fixed chunks of [`CHUNK`] rows. Each chunk
//! is reduced sequentially and chunk partials are summed in chunk order, so
//! the parallel and sequential paths agree bit for bit.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numerics::matrix::{matmul_t, row_times_matrix, t_matmul};
use crate::numerics::{norm, AdamState, Matrix, RngSeed};

/// Samples per reduction chunk.
pub const CHUNK: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct SaeModel {
    encoder: Matrix,
    decoder: Matrix,
}

impl SaeModel {
    /// `encoder` is `d×h`, `decoder` is `h×d`.
    pub fn new(encoder: Matrix, decoder: Matrix) -> Result<Self> {
        if encoder.rows() != decoder.cols() || encoder.cols() != decoder.rows() {
            return Err(Error::DimensionMismatch {
                op: "SaeModel::new",
                left: encoder.shape(),
                right: decoder.shape(),
            });
        }
        if encoder.rows() == 0 || encoder.cols() == 0 {
            return Err(Error::invalid("SAE dimensions must be positive"));
        }
        Ok(Self { encoder, decoder })
    }

    /// Entries i.i.d. uniform in `[-1/√d, 1/√d]`.
    pub fn init<R: Rng + ?Sized>(d: usize, h: usize, rng: &mut R) -> Result<Self> {
        let bound = 1.0 / (d as f64).sqrt();
        let encoder = Matrix::uniform(d, h, bound, rng);
        let decoder = Matrix::uniform(h, d, bound, rng);
        Self::new(encoder, decoder)
    }

    pub fn d(&self) -> usize {
        self.encoder.rows()
    }

    pub fn h(&self) -> usize {
        self.encoder.cols()
    }

    pub fn encoder(&self) -> &Matrix {
        &self.encoder
    }

    pub fn decoder(&self) -> &Matrix {
        &self.decoder
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Matrix, &mut Matrix) {
        (&mut self.encoder, &mut self.decoder)
    }

    /// Weights as they survive an `f32` checkpoint.
    pub fn round_to_f32(&self) -> SaeModel {
        SaeModel {
            encoder: self.encoder.round_to_f32(),
            decoder: self.decoder.round_to_f32(),
        }
    }

    fn check_width(&self, op: &'static str, m: &Matrix) -> Result<()> {
        if m.cols() != self.d() {
            return Err(Error::DimensionMismatch {
                op,
                left: m.shape(),
                right: self.encoder.shape(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaeConfig {
    pub expansion_factor: usize,
    pub lambda1: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Dead latents are resampled after every `resample_every`-th epoch.
    pub resample_every: usize,
    pub seed: RngSeed,
}

impl Default for SaeConfig {
    fn default() -> Self {
        Self {
            expansion_factor: 8,
            lambda1: 3e-5,
            lr: 5e-4,
            epochs: 200,
            batch_size: 4096,
            resample_every: 10,
            seed: RngSeed(0),
        }
    }
}

impl SaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.expansion_factor < 1 {
            return Err(Error::invalid("expansion_factor must be >= 1"));
        }
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return Err(Error::invalid("lambda1 must be finite and >= 0"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("lr must be finite and > 0"));
        }
        if self.epochs < 1 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if self.resample_every < 1 {
            return Err(Error::invalid("resample_every must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaeLossReport {
    /// Mean of `‖SAE(a) − a‖²`.
    pub recon_l2: f64,
    /// Mean of `‖ReLU(W_Eᵀ a)‖₁`.
    pub sparsity_l1: f64,
    /// `recon_l2 + λ₁ · sparsity_l1`.
    pub total: f64,
    /// Mean number of strictly positive latents per sample.
    pub mean_active: f64,
}

/// Non-negative `N×h` latent activations.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptActivations(Matrix);

impl ConceptActivations {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.data().iter().any(|&x| x < 0.0) {
            return Err(Error::invalid("concept activations must be non-negative"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn h(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }
}

/// Gradients of [`SaeLossReport::total`] with respect to both weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SaeGrad {
    pub encoder: Matrix,
    pub decoder: Matrix,
}

/// Adam state for the encoder and decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamPair {
    pub encoder: AdamState,
    pub decoder: AdamState,
}

impl AdamPair {
    pub fn new(model: &SaeModel, lr: f64) -> Self {
        Self {
            encoder: AdamState::new(model.d(), model.h(), lr),
            decoder: AdamState::new(model.h(), model.d(), lr),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedSae {
    pub model: SaeModel,
    /// One report per epoch, measured on the full training set.
    pub history: Vec<SaeLossReport>,
    /// Latents reinitialised at each resampling round, by epoch.
    pub resampled: Vec<(usize, Vec<usize>)>,
}

/// Latent and reconstruction for a single input.
pub fn sae_forward(model: &SaeModel, a: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.len() != model.d() {
        return Err(Error::DimensionMismatch {
            op: "sae_forward",
            left: (1, a.len()),
            right: model.encoder.shape(),
        });
    }
    let mut latent = vec![0.0; model.h()];
    row_times_matrix(a, &model.encoder, &mut latent);
    latent.iter_mut().for_each(|z| *z = z.max(0.0));
    let mut recon = vec![0.0; model.d()];
    row_times_matrix(&latent, &model.decoder, &mut recon);
    Ok((latent, recon))
}

pub fn encode(model: &SaeModel, features: &Matrix) -> Result<ConceptActivations> {
    encode_with(Exec::default(), model, features)
}

pub fn encode_with(exec: Exec, model: &SaeModel, features: &Matrix) -> Result<ConceptActivations> {
    model.check_width("encode", features)?;
    let h = model.h();
    let mut out = Matrix::zeros(features.rows(), h);
    if h > 0 {
        exec.for_each_chunk_mut(out.data_mut(), h, |i, row| {
            row_times_matrix(features.row(i), &model.encoder, row);
            row.iter_mut().for_each(|z| *z = z.max(0.0));
        });
    }
    Ok(ConceptActivations(out.check_finite("concept activations")?))
}

/// Reconstructions `SAE(a)` for every row.
pub fn reconstruct(model: &SaeModel, features: &Matrix) -> Result<Matrix> {
    let z = encode(model, features)?;
    let mut out = Matrix::zeros(features.rows(), model.d());
    let d = model.d();
    Exec::default().for_each_chunk_mut(out.data_mut(), d, |i, row| {
        row_times_matrix(z.row(i), &model.decoder, row);
    });
    out.check_finite("reconstruction")
}

pub fn sae_loss(model: &SaeModel, batch: &Matrix, lambda1: f64) -> Result<SaeLossReport> {
    sae_loss_with(Exec::default(), model, batch, lambda1)
}

pub fn sae_loss_with(
    exec: Exec,
    model: &SaeModel,
    batch: &Matrix,
    lambda1: f64,
) -> Result<SaeLossReport> {
    model.check_width("sae_loss", batch)?;
    let sums = exec
        .map_ranges(batch.rows(), CHUNK, |range| loss_chunk(model, batch, range))
        .into_iter()
        .fold(LossSums::default(), LossSums::add);
    Ok(sums.report(batch.rows(), lambda1))
}

pub fn sae_grad(model: &SaeModel, batch: &Matrix, lambda1: f64) -> Result<SaeGrad> {
    sae_grad_with(Exec::default(), model, batch, lambda1)
}

/// Analytic gradient, taking subgradient 0 at ReLU and L1 kinks.
pub fn sae_grad_with(
    exec: Exec,
    model: &SaeModel,
    batch: &Matrix,
    lambda1: f64,
) -> Result<SaeGrad> {
    Ok(loss_and_grad(exec, model, batch, lambda1)?.1)
}

fn loss_and_grad(
    exec: Exec,
    model: &SaeModel,
    batch: &Matrix,
    lambda1: f64,
) -> Result<(SaeLossReport, SaeGrad)> {
    model.check_width("sae_grad", batch)?;
    let n = batch.rows();
    if n == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let parts = exec.map_ranges(n, CHUNK, |range| grad_chunk(model, batch, range, lambda1));
    let mut iter = parts.into_iter();
    let (mut sums, mut g_enc, mut g_dec) = iter.next().expect("n > 0");
    for (s, e, d) in iter {
        sums = sums.add(s);
        add_into(&mut g_enc, &e);
        add_into(&mut g_dec, &d);
    }
    let inv = 1.0 / n as f64;
    g_enc.data_mut().iter_mut().for_each(|x| *x *= inv);
    g_dec.data_mut().iter_mut().for_each(|x| *x *= inv);
    Ok((
        sums.report(n, lambda1),
        SaeGrad {
            encoder: g_enc.check_finite("encoder gradient")?,
            decoder: g_dec.check_finite("decoder gradient")?,
        },
    ))
}

fn add_into(acc: &mut Matrix, other: &Matrix) {
    for (a, b) in acc.data_mut().iter_mut().zip(other.data()) {
        *a += b;
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct LossSums {
    recon: f64,
    l1: f64,
    active: usize,
}

impl LossSums {
    fn add(self, o: LossSums) -> LossSums {
        LossSums {
            recon: self.recon + o.recon,
            l1: self.l1 + o.l1,
            active: self.active + o.active,
        }
    }

    fn report(self, n: usize, lambda1: f64) -> SaeLossReport {
        let n = n.max(1) as f64;
        let recon_l2 = self.recon / n;
        let sparsity_l1 = self.l1 / n;
        SaeLossReport {
            recon_l2,
            sparsity_l1,
            total: recon_l2 + lambda1 * sparsity_l1,
            mean_active: self.active as f64 / n,
        }
    }
}

/// Latents, residuals and loss sums for rows `range` of `batch`.
fn forward_chunk(
    model: &SaeModel,
    batch: &Matrix,
    range: std::ops::Range<usize>,
) -> (Matrix, Matrix, Matrix, LossSums) {
    let rows = range.len();
    let (d, h) = (model.d(), model.h());
    let mut pre = Matrix::zeros(rows, h);
    let mut resid = Matrix::zeros(rows, d);
    let mut sums = LossSums::default();
    for (r, i) in range.enumerate() {
        let a = batch.row(i);
        let u = pre.row_mut(r);
        row_times_matrix(a, &model.encoder, u);
        let mut z = u.to_vec();
        for x in z.iter_mut() {
            if *x > 0.0 {
                sums.l1 += *x;
                sums.active += 1;
            } else {
                *x = 0.0;
            }
        }
        let e = resid.row_mut(r);
        row_times_matrix(&z, &model.decoder, e);
        for (e, x) in e.iter_mut().zip(a) {
            *e -= x;
            sums.recon += *e * *e;
        }
    }
    let mut latent = pre.clone();
    latent.data_mut().iter_mut().for_each(|x| *x = x.max(0.0));
    (pre, latent, resid, sums)
}

fn loss_chunk(model: &SaeModel, batch: &Matrix, range: std::ops::Range<usize>) -> LossSums {
    forward_chunk(model, batch, range).3
}

fn grad_chunk(
    model: &SaeModel,
    batch: &Matrix,
    range: std::ops::Range<usize>,
    lambda1: f64,
) -> (LossSums, Matrix, Matrix) {
    let start = range.start;
    let rows = range.len();
    let (pre, latent, resid, sums) = forward_chunk(model, batch, range);
    // ∂/∂W_D = 2 zᵀ r
    let mut g_dec = t_matmul(&latent, &resid);
    g_dec.data_mut().iter_mut().for_each(|x| *x *= 2.0);
    // ∂/∂u = 1[u > 0] ⊙ (2 W_D r + λ₁)
    let mut delta = matmul_t(&resid, &model.decoder);
    for (dv, &u) in delta.data_mut().iter_mut().zip(pre.data()) {
        *dv = if u > 0.0 { 2.0 * *dv + lambda1 } else { 0.0 };
    }
    let inputs = batch
        .select_rows(&(start..start + rows).collect::<Vec<_>>())
        .expect("chunk rows in range");
    let g_enc = t_matmul(&inputs, &delta);
    (sums, g_enc, g_dec)
}

pub fn train_sae(features: &Matrix, config: &SaeConfig) -> Result<TrainedSae> {
    train_sae_with(Exec::default(), features, config)
}

/// Minibatch Adam on the SAE objective with periodic dead-latent resampling.
///
/// A trailing partial batch is trained on rather than dropped. Resampling
/// happens after epochs that are multiples of `resample_every`, except the
/// last one.
pub fn train_sae_with(exec: Exec, features: &Matrix, config: &SaeConfig) -> Result<TrainedSae> {
    config.validate()?;
    let n = features.rows();
    if n == 0 {
        return Err(Error::invalid("cannot train an SAE on an empty dataset"));
    }
    if !features.is_finite() {
        return Err(Error::NonFinite("training features".into()));
    }
    let d = features.cols();
    if d == 0 {
        return Err(Error::invalid("features have zero width"));
    }
    let h = config.expansion_factor * d;
    let batch_size = config.batch_size.min(n);

    let mut rng = config.seed.rng();
    let mut model = SaeModel::init(d, h, &mut rng)?;
    normalize_rows(&mut model.decoder);
    let mut adam = AdamPair::new(&model, config.lr);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut resampled = Vec::new();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for idx in order.chunks(batch_size) {
            let batch = features.select_rows(idx)?;
            let (_, grad) =
                loss_and_grad(exec, &model, &batch, config.lambda1).map_err(|e| match e {
                    Error::NonFinite(_) => Error::Diverged { epoch },
                    other => other,
                })?;
            let (enc, dec) = model.parts_mut();
            adam.encoder.update(enc, &grad.encoder)?;
            adam.decoder.update(dec, &grad.decoder)?;
            normalize_rows(dec);
        }
        if !(model.encoder.is_finite() && model.decoder.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        let report = sae_loss_with(exec, &model, features, config.lambda1)?;
        if !report.total.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.push(report);

        if epoch % config.resample_every == 0 && epoch < config.epochs {
            let seed = config.seed.derive(&format!("resample-{epoch}"));
            let (m, a, dead) = resample_dead_neurons_with(exec, &model, features, &adam, seed)?;
            model = m;
            adam = a;
            if !dead.is_empty() {
                resampled.push((epoch, dead));
            }
        }
    }

    Ok(TrainedSae {
        model,
        history,
        resampled,
    })
}

/// Project every non-zero decoder row back onto the unit sphere. Without it
/// the L1 penalty can be dodged by shrinking latents and growing `W_D`.
fn normalize_rows(m: &mut Matrix) {
    for i in 0..m.rows() {
        let row = m.row_mut(i);
        let len = norm(row);
        if len > 0.0 {
            row.iter_mut().for_each(|x| *x /= len);
        }
    }
}

pub fn resample_dead_neurons(
    model: &SaeModel,
    features: &Matrix,
    adam: &AdamPair,
    seed: RngSeed,
) -> Result<(SaeModel, AdamPair, Vec<usize>)> {
    resample_dead_neurons_with(Exec::default(), model, features, adam, seed)
}

/// Reinitialise latents that never fire on `features`.
///
/// Each dead latent gets the direction of a training sample drawn with
/// probability proportional to its squared reconstruction error: the decoder
/// row becomes that unit vector and the encoder column the same vector scaled
/// to 0.2× the mean live encoder-column norm. Their Adam moments are zeroed.
pub fn resample_dead_neurons_with(
    exec: Exec,
    model: &SaeModel,
    features: &Matrix,
    adam: &AdamPair,
    seed: RngSeed,
) -> Result<(SaeModel, AdamPair, Vec<usize>)> {
    model.check_width("resample_dead_neurons", features)?;
    let (d, h) = (model.d(), model.h());

    let parts = exec.map_ranges(features.rows(), CHUNK, |range| {
        let (_, latent, resid, _) = forward_chunk(model, features, range);
        let mut fired = vec![false; h];
        for row in latent.row_iter() {
            for (f, &z) in fired.iter_mut().zip(row) {
                *f |= z > 0.0;
            }
        }
        let errors: Vec<f64> = resid
            .row_iter()
            .map(|r| r.iter().map(|e| e * e).sum())
            .collect();
        (fired, errors)
    });
    let mut fired = vec![false; h];
    let mut errors = Vec::with_capacity(features.rows());
    for (f, e) in parts {
        fired.iter_mut().zip(&f).for_each(|(a, b)| *a |= b);
        errors.extend(e);
    }
    let dead: Vec<usize> = (0..h).filter(|&j| !fired[j]).collect();
    if dead.is_empty() || features.rows() == 0 {
        return Ok((model.clone(), adam.clone(), Vec::new()));
    }

    let live: Vec<f64> = (0..h)
        .filter(|&j| fired[j])
        .map(|j| norm(&model.encoder.column(j)))
        .collect();
    let live_norm = if live.is_empty() {
        1.0
    } else {
        live.iter().sum::<f64>() / live.len() as f64
    };

    let mut rng = seed.rng();
    let sampler = WeightedIndex::new(&errors).ok();
    let mut model = model.clone();
    let mut adam = adam.clone();
    for &j in &dead {
        let i = match &sampler {
            Some(w) => w.sample(&mut rng),
            None => rng.random_range(0..features.rows()),
        };
        let a = features.row(i);
        let len = norm(a);
        let dir: Vec<f64> = if len > 0.0 {
            a.iter().map(|x| x / len).collect()
        } else {
            (0..d).map(|k| if k == j % d { 1.0 } else { 0.0 }).collect()
        };
        let scaled: Vec<f64> = dir.iter().map(|x| x * 0.2 * live_norm).collect();
        model.encoder.set_column(j, &scaled);
        model.decoder.row_mut(j).copy_from_slice(&dir);
        adam.encoder.reset_column(j);
        adam.decoder.reset_row(j);
    }
    Ok((model, adam, dead))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn random_model(seed: u64, d: usize, h: usize) -> SaeModel {
        SaeModel::init(d, h, &mut RngSeed(seed).rng()).unwrap()
    }

    #[test]
    fn zero_input_has_zero_outputs() {
        let model = random_model(1, 4, 8);
        let (z, r) = sae_forward(&model, &[0.0; 4]).unwrap();
        assert!(z.iter().all(|&x| x == 0.0));
        assert!(r.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn relu_kills_negative_channel() {
        let model = SaeModel::new(m(&[&[1.0, -1.0]]), m(&[&[2.0], &[3.0]])).unwrap();
        let (z, r) = sae_forward(&model, &[1.0]).unwrap();
        assert_eq!(z, vec![1.0, 0.0]);
        assert_eq!(r, vec![2.0]);
    }

    #[test]
    fn forward_matches_matmul_composition() {
        let model = random_model(2, 5, 10);
        let a = Matrix::uniform(1, 5, 1.0, &mut RngSeed(3).rng());
        let mut u = crate::numerics::matmul(&a, model.encoder()).unwrap();
        u.data_mut().iter_mut().for_each(|x| *x = x.max(0.0));
        let recon = crate::numerics::matmul(&u, model.decoder()).unwrap();
        let (z, r) = sae_forward(&model, a.row(0)).unwrap();
        for (x, y) in z.iter().zip(u.data()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
        for (x, y) in r.iter().zip(recon.data()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let model = random_model(1, 3, 6);
        assert!(matches!(
            sae_forward(&model, &[1.0; 4]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(encode(&model, &Matrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn dead_model_loss() {
        // ‖a‖² = 1 + 4 = 5
        let model = SaeModel::new(Matrix::zeros(2, 4), Matrix::zeros(4, 2)).unwrap();
        let r = sae_loss(&model, &m(&[&[1.0, 2.0]]), 0.5).unwrap();
        assert_eq!(r.recon_l2, 5.0);
        assert_eq!(r.sparsity_l1, 0.0);
        assert_eq!(r.mean_active, 0.0);
    }

    #[test]
    fn identity_model_loss() {
        let model = SaeModel::new(Matrix::identity(2), Matrix::identity(2)).unwrap();
        let r = sae_loss(&model, &m(&[&[1.0, 2.0]]), 0.1).unwrap();
        assert_eq!(r.recon_l2, 0.0);
        assert_eq!(r.sparsity_l1, 3.0);
        assert_eq!(r.mean_active, 2.0);
        assert!((r.total - 0.3).abs() < 1e-15);
        let r0 = sae_loss(&model, &m(&[&[1.0, 2.0]]), 0.0).unwrap();
        assert_eq!(r0.total, r0.recon_l2);
    }

    #[test]
    fn loss_decomposes() {
        let model = random_model(4, 6, 12);
        let batch = Matrix::uniform(300, 6, 1.0, &mut RngSeed(5).rng());
        let r = sae_loss(&model, &batch, 0.37).unwrap();
        assert!((r.total - (r.recon_l2 + 0.37 * r.sparsity_l1)).abs() < 1e-10);
        assert!(r.recon_l2 >= 0.0 && r.sparsity_l1 >= 0.0);
    }

    #[test]
    fn fully_dead_network_has_zero_gradient() {
        let mut rng = RngSeed(6).rng();
        let model =
            SaeModel::new(Matrix::zeros(3, 6), Matrix::uniform(6, 3, 1.0, &mut rng)).unwrap();
        let batch = Matrix::uniform(10, 3, 1.0, &mut rng);
        let g = sae_grad(&model, &batch, 0.1).unwrap();
        assert!(g.encoder.data().iter().all(|&x| x == 0.0));
        assert!(g.decoder.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradient_is_affine_in_lambda() {
        let model = random_model(7, 4, 8);
        let batch = Matrix::uniform(20, 4, 1.0, &mut RngSeed(8).rng());
        let g0 = sae_grad(&model, &batch, 0.0).unwrap();
        let g1 = sae_grad(&model, &batch, 0.3).unwrap();
        let g2 = sae_grad(&model, &batch, 0.6).unwrap();
        for ((a, b), c) in g0
            .encoder
            .data()
            .iter()
            .zip(g1.encoder.data())
            .zip(g2.encoder.data())
        {
            assert!(((c - b) - (b - a)).abs() < 1e-10);
        }
        // the decoder gradient does not see λ₁ at all
        assert_eq!(g0.decoder, g2.decoder);
    }

    #[test]
    fn encode_batch_matches_rows() {
        let model = random_model(9, 5, 15);
        let x = Matrix::uniform(270, 5, 1.0, &mut RngSeed(10).rng());
        let z = encode(&model, &x).unwrap();
        for i in [0, 1, 128, 269] {
            let (latent, _) = sae_forward(&model, x.row(i)).unwrap();
            assert_eq!(z.row(i), latent.as_slice());
        }
        assert!(z.values().data().iter().all(|&v| v >= 0.0));
        let zero = encode(&model, &Matrix::zeros(3, 5)).unwrap();
        assert!(zero.values().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parallel_and_sequential_gradients_agree_bitwise() {
        let model = random_model(11, 6, 24);
        let batch = Matrix::uniform(700, 6, 1.0, &mut RngSeed(12).rng());
        let a = sae_grad_with(Exec::Sequential, &model, &batch, 1e-3).unwrap();
        let b = sae_grad_with(Exec::Parallel, &model, &batch, 1e-3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn one_epoch_one_report() {
        let x = Matrix::uniform(50, 4, 1.0, &mut RngSeed(13).rng());
        let cfg = SaeConfig {
            epochs: 1,
            batch_size: 16,
            expansion_factor: 2,
            ..SaeConfig::default()
        };
        let t = train_sae(&x, &cfg).unwrap();
        assert_eq!(t.history.len(), 1);
        assert_eq!(t.model.h(), 8);
    }

    #[test]
    fn training_is_deterministic() {
        let x = Matrix::uniform(200, 4, 1.0, &mut RngSeed(14).rng());
        let cfg = SaeConfig {
            epochs: 5,
            batch_size: 32,
            expansion_factor: 2,
            resample_every: 2,
            lr: 1e-2,
            seed: RngSeed(99),
            ..SaeConfig::default()
        };
        let a = train_sae_with(Exec::Parallel, &x, &cfg).unwrap();
        let b = train_sae_with(Exec::Sequential, &x, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(train_sae(&Matrix::zeros(0, 3), &SaeConfig::default()).is_err());
    }

    #[test]
    fn divergence_reports_epoch() {
        let x = Matrix::from_rows(&[[1e200, 1e200]]).unwrap();
        let cfg = SaeConfig {
            epochs: 3,
            batch_size: 1,
            expansion_factor: 1,
            ..SaeConfig::default()
        };
        assert!(matches!(
            train_sae(&x, &cfg),
            Err(Error::Diverged { epoch: 1 })
        ));
    }

    #[test]
    fn resample_without_dead_neurons_is_noop() {
        let model = SaeModel::new(Matrix::identity(2), Matrix::identity(2)).unwrap();
        let x = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let adam = AdamPair::new(&model, 1e-3);
        let (m2, a2, dead) = resample_dead_neurons(&model, &x, &adam, RngSeed(0)).unwrap();
        assert!(dead.is_empty());
        assert_eq!(m2, model);
        assert_eq!(a2, adam);
    }

    #[test]
    fn resample_revives_zero_column() {
        let mut rng = RngSeed(15).rng();
        let mut enc = Matrix::uniform(3, 6, 1.0, &mut rng);
        enc.set_column(2, &[0.0; 3]);
        let model = SaeModel::new(enc, Matrix::uniform(6, 3, 1.0, &mut rng)).unwrap();
        let x = Matrix::uniform(40, 3, 1.0, &mut rng);
        let mut adam = AdamPair::new(&model, 1e-3);
        adam.encoder.m.data_mut().fill(0.5);
        adam.decoder.v.data_mut().fill(0.5);
        let (m2, a2, dead) = resample_dead_neurons(&model, &x, &adam, RngSeed(1)).unwrap();
        assert!(dead.contains(&2));
        assert!(norm(&m2.encoder().column(2)) > 0.0);
        assert!((norm(m2.decoder().row(2)) - 1.0).abs() < 1e-12);
        assert!(a2.encoder.m.column(2).iter().all(|&v| v == 0.0));
        assert!(a2.decoder.v.row(2).iter().all(|&v| v == 0.0));
        // live latents untouched
        for j in (0..6).filter(|j| !dead.contains(j)) {
            assert_eq!(m2.encoder().column(j), model.encoder().column(j));
            assert_eq!(m2.decoder().row(j), model.decoder().row(j));
            assert_eq!(a2.encoder.m.column(j), adam.encoder.m.column(j));
        }
    }
}
