//! Translator objectives and their gradients.
//!
//! Generator side: adversarial term on translated images, classification of
//! translated images into the target class, and L1 cycle reconstruction
//! after translating back to the source class. Discriminator side:
//! adversarial term on real vs translated images, classification of real
//! images into their source class and, for the critic variant, a gradient
//! norm penalty on random interpolates.

use serde::{Deserialize, Serialize};

use super::config::{AdversarialLoss, LossWeights};
use super::networks::{Discriminator, Generator};
use crate::emotion::NUM_EMOTIONS;
use crate::error::{Error, Result};
use crate::nn::{ops, Grads, Params, Tensor};

/// Images in `[-1,1]` with source and target class indices.
#[derive(Clone, Debug)]
pub struct TranslatorBatch {
    pub images: Tensor,
    pub sources: Vec<usize>,
    pub targets: Vec<usize>,
}

impl TranslatorBatch {
    pub fn new(images: Tensor, sources: Vec<usize>, targets: Vec<usize>) -> Result<Self> {
        if images.batch() == 0 {
            return Err(Error::EmptyBatch);
        }
        for labels in [&sources, &targets] {
            if labels.len() != images.batch() {
                return Err(Error::LengthMismatch {
                    left: images.batch(),
                    right: labels.len(),
                });
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= NUM_EMOTIONS) {
                return Err(Error::LabelOutOfRange(bad));
            }
        }
        Ok(TranslatorBatch {
            images,
            sources,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.images.batch()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The networks, their weights and the objective settings.
#[derive(Clone, Copy)]
pub struct LossSetup<'a> {
    pub generator: &'a Generator,
    pub generator_params: &'a Params,
    pub discriminator: &'a Discriminator,
    pub discriminator_params: &'a Params,
    pub weights: LossWeights,
    pub adversarial: AdversarialLoss,
    pub gradient_penalty_weight: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TranslatorLosses {
    pub adversarial: f64,
    pub classification: f64,
    pub reconstruction: f64,
    /// Weighted sum of the three terms.
    pub total: f64,
}

impl TranslatorLosses {
    pub fn is_finite(&self) -> bool {
        [self.adversarial, self.classification, self.reconstruction, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorLosses {
    pub adversarial: f64,
    pub classification: f64,
    /// Zero unless the critic variant is selected.
    pub gradient_penalty: f64,
    pub total: f64,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Generator-side adversarial loss on fake scores and its derivative.
fn generator_adversarial(kind: AdversarialLoss, scores: &[f64]) -> (f64, Vec<f64>) {
    let n = scores.len() as f64;
    match kind {
        AdversarialLoss::LeastSquares => (
            scores.iter().map(|s| (s - 1.0).powi(2)).sum::<f64>() / n,
            scores.iter().map(|s| 2.0 * (s - 1.0) / n).collect(),
        ),
        // Minimizes log(1 - sigmoid(s)) = -softplus(s).
        AdversarialLoss::Saturating => (
            -scores.iter().map(|&s| softplus(s)).sum::<f64>() / n,
            scores.iter().map(|&s| -sigmoid(s) / n).collect(),
        ),
        AdversarialLoss::GradientPenalty => (
            -scores.iter().sum::<f64>() / n,
            vec![-1.0 / n; scores.len()],
        ),
    }
}

/// Discriminator-side adversarial loss and derivatives for real and fake.
fn discriminator_adversarial(kind: AdversarialLoss, real: &[f64], fake: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let nr = real.len() as f64;
    let nf = fake.len() as f64;
    match kind {
        AdversarialLoss::LeastSquares => (
            real.iter().map(|s| (s - 1.0).powi(2)).sum::<f64>() / nr + fake.iter().map(|s| s * s).sum::<f64>() / nf,
            real.iter().map(|s| 2.0 * (s - 1.0) / nr).collect(),
            fake.iter().map(|s| 2.0 * s / nf).collect(),
        ),
        AdversarialLoss::Saturating => (
            real.iter().map(|&s| softplus(-s)).sum::<f64>() / nr + fake.iter().map(|&s| softplus(s)).sum::<f64>() / nf,
            real.iter().map(|&s| -sigmoid(-s) / nr).collect(),
            fake.iter().map(|&s| sigmoid(s) / nf).collect(),
        ),
        AdversarialLoss::GradientPenalty => (
            fake.iter().sum::<f64>() / nf - real.iter().sum::<f64>() / nr,
            vec![-1.0 / nr; real.len()],
            vec![1.0 / nf; fake.len()],
        ),
    }
}

/// Splits `[n, 7]` discriminator output into scores and `[n, 6]` logits.
fn split_head(out: &Tensor) -> (Vec<f64>, Tensor) {
    let n = out.batch();
    let scores = (0..n).map(|i| out.sample(i)[0]).collect();
    let mut logits = Vec::with_capacity(n * NUM_EMOTIONS);
    for i in 0..n {
        logits.extend_from_slice(&out.sample(i)[1..]);
    }
    (scores, Tensor::from_vec([n, NUM_EMOTIONS, 1, 1], logits))
}

/// Reassembles a `[n, 7]` head gradient.
fn join_head(d_scores: &[f64], d_logits: Option<&Tensor>) -> Tensor {
    let n = d_scores.len();
    let mut g = Tensor::zeros([n, 1 + NUM_EMOTIONS, 1, 1]);
    for i in 0..n {
        let row = g.sample_mut(i);
        row[0] = d_scores[i];
        if let Some(dl) = d_logits {
            row[1..].copy_from_slice(dl.sample(i));
        }
    }
    g
}

/// Mean absolute error and its gradient with respect to `y`.
fn l1(y: &Tensor, x: &Tensor) -> (f64, Tensor) {
    let n = y.data().len() as f64;
    let mut g = Tensor::zeros(y.shape());
    let mut loss = 0.0;
    for ((gv, a), b) in g.data_mut().iter_mut().zip(y.data()).zip(x.data()) {
        let d = a - b;
        loss += d.abs();
        *gv = if d > 0.0 {
            1.0 / n
        } else if d < 0.0 {
            -1.0 / n
        } else {
            0.0
        };
    }
    (loss / n, g)
}

fn check_batch(batch: &TranslatorBatch) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(())
}

/// Generator objective without gradients.
pub fn translator_losses(setup: &LossSetup, batch: &TranslatorBatch) -> Result<TranslatorLosses> {
    check_batch(batch)?;
    let g = setup.generator;
    let fake = g.infer(setup.generator_params, &batch.images, &batch.targets);
    let out = setup.discriminator.infer(setup.discriminator_params, &fake);
    let (scores, logits) = split_head(&out);
    let (adversarial, _) = generator_adversarial(setup.adversarial, &scores);
    let (classification, _) = ops::softmax_cross_entropy(&logits, &batch.targets);
    let rec = g.infer(setup.generator_params, &fake, &batch.sources);
    let (reconstruction, _) = l1(&rec, &batch.images);
    Ok(combine(setup.weights, adversarial, classification, reconstruction))
}

fn combine(w: LossWeights, adversarial: f64, classification: f64, reconstruction: f64) -> TranslatorLosses {
    TranslatorLosses {
        adversarial,
        classification,
        reconstruction,
        total: w.adversarial * adversarial + w.classification * classification + w.reconstruction * reconstruction,
    }
}

/// Generator objective and its gradient with respect to generator weights.
pub fn generator_gradients(setup: &LossSetup, batch: &TranslatorBatch) -> Result<(TranslatorLosses, Grads)> {
    check_batch(batch)?;
    let g = setup.generator;
    let gp = setup.generator_params;
    let w = setup.weights;
    let mut grads = gp.zeros_like();

    let (fake, tape_fake) = g.forward(gp, &batch.images, &batch.targets);
    let (out, tape_d) = setup.discriminator.forward(setup.discriminator_params, &fake);
    let (scores, logits) = split_head(&out);
    let (adversarial, d_scores) = generator_adversarial(setup.adversarial, &scores);
    let (classification, d_logits) = ops::softmax_cross_entropy(&logits, &batch.targets);
    let d_scores: Vec<f64> = d_scores.iter().map(|v| v * w.adversarial).collect();
    let d_logits = d_logits.map(|v| v * w.classification);
    let mut d_fake = setup.discriminator.backward(
        setup.discriminator_params,
        tape_d,
        join_head(&d_scores, Some(&d_logits)),
        None,
    );

    let (rec, tape_rec) = g.forward(gp, &fake, &batch.sources);
    let (reconstruction, d_rec) = l1(&rec, &batch.images);
    let d_fake_cycle = g.backward(gp, tape_rec, d_rec.map(|v| v * w.reconstruction), &mut grads);
    d_fake.add_assign(&d_fake_cycle);
    g.backward(gp, tape_fake, d_fake, &mut grads);

    Ok((combine(w, adversarial, classification, reconstruction), grads))
}

/// Relative size of the input perturbation used for the penalty's
/// Hessian-vector product.
const HVP_STEP: f64 = 1e-6;

/// Discriminator objective and its gradient with respect to discriminator
/// weights. `mix` holds one interpolation weight in [0,1] per sample and is
/// only read by the critic variant.
pub fn discriminator_gradients(
    setup: &LossSetup,
    batch: &TranslatorBatch,
    mix: &[f64],
) -> Result<(DiscriminatorLosses, Grads)> {
    discriminator_pass(setup, batch, mix, true).map(|(l, g)| (l, g.expect("requested")))
}

/// Discriminator objective without gradients.
pub fn discriminator_losses(setup: &LossSetup, batch: &TranslatorBatch, mix: &[f64]) -> Result<DiscriminatorLosses> {
    discriminator_pass(setup, batch, mix, false).map(|(l, _)| l)
}

fn discriminator_pass(
    setup: &LossSetup,
    batch: &TranslatorBatch,
    mix: &[f64],
    want_grads: bool,
) -> Result<(DiscriminatorLosses, Option<Grads>)> {
    check_batch(batch)?;
    let d = setup.discriminator;
    let dp = setup.discriminator_params;
    let w = setup.weights;
    let fake = setup.generator.infer(setup.generator_params, &batch.images, &batch.targets);

    let (out_r, tape_r) = d.forward(dp, &batch.images);
    let (out_f, tape_f) = d.forward(dp, &fake);
    let (s_r, logits_r) = split_head(&out_r);
    let (s_f, _) = split_head(&out_f);
    let (adversarial, d_sr, d_sf) = discriminator_adversarial(setup.adversarial, &s_r, &s_f);
    let (classification, d_logits) = ops::softmax_cross_entropy(&logits_r, &batch.sources);

    let mut gradient_penalty = 0.0;
    let mut grads = want_grads.then(|| dp.zeros_like());
    if let Some(grads) = grads.as_mut() {
        let d_sr: Vec<f64> = d_sr.iter().map(|v| v * w.adversarial).collect();
        let d_sf: Vec<f64> = d_sf.iter().map(|v| v * w.adversarial).collect();
        d.backward_params(dp, tape_r, join_head(&d_sr, Some(&d_logits.map(|v| v * w.classification))), grads);
        d.backward_params(dp, tape_f, join_head(&d_sf, None), grads);
    }

    if setup.adversarial == AdversarialLoss::GradientPenalty {
        let n = batch.len();
        if mix.len() != n {
            return Err(Error::LengthMismatch { left: n, right: mix.len() });
        }
        let mut interp = batch.images.clone();
        for i in 0..n {
            let e = mix[i];
            let f = fake.sample(i).to_vec();
            for (v, fv) in interp.sample_mut(i).iter_mut().zip(f) {
                *v = e * *v + (1.0 - e) * fv;
            }
        }
        let ones = join_head(&vec![1.0; n], None);
        let (_, tape) = d.forward(dp, &interp);
        let g = d.backward(dp, tape, ones.clone(), None);
        // P = mean_i (|g_i| - 1)^2 and v_i = dP/dg_i.
        let mut v = Tensor::zeros(g.shape());
        for i in 0..n {
            let gi = g.sample(i);
            let norm = gi.iter().map(|x| x * x).sum::<f64>().sqrt();
            gradient_penalty += (norm - 1.0).powi(2) / n as f64;
            if norm > 0.0 {
                let c = 2.0 * (norm - 1.0) / (n as f64 * norm);
                v.sample_mut(i).iter_mut().zip(gi).for_each(|(o, x)| *o = c * x);
            }
        }
        if let Some(grads) = grads.as_mut() {
            // d/dθ <v, ∇x S(x̂)> = d/dh ∇θ S(x̂ + h v) at h = 0, by central
            // differences along v.
            let vmax = v.data().iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if vmax > 0.0 {
                let h = HVP_STEP / vmax;
                let mut plus = setup.discriminator_params.zeros_like();
                let mut minus = setup.discriminator_params.zeros_like();
                for (sign, acc) in [(1.0, &mut plus), (-1.0, &mut minus)] {
                    let mut xs = interp.clone();
                    xs.data_mut().iter_mut().zip(v.data()).for_each(|(x, vi)| *x += sign * h * vi);
                    let (_, t) = d.forward(dp, &xs);
                    d.backward_params(dp, t, ones.clone(), acc);
                }
                let scale = setup.gradient_penalty_weight / (2.0 * h);
                grads.add_scaled(&plus, scale);
                grads.add_scaled(&minus, -scale);
            }
        }
    }

    let total = w.adversarial * adversarial
        + w.classification * classification
        + setup.gradient_penalty_weight * gradient_penalty;
    Ok((
        DiscriminatorLosses {
            adversarial,
            classification,
            gradient_penalty,
            total,
        },
        grads,
    ))
}
