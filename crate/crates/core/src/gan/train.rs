use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::GanTrainConfig;
use super::losses::{discriminator_gradients, generator_gradients, LossSetup, TranslatorBatch};
use super::translator::{to_signed, TranslatorCheckpoint};
use crate::data::FaceDataset;
use crate::emotion::EmotionLabel;
use crate::error::{Error, Result};
use crate::nn::{Optimizer, Tensor};

/// Generator losses recorded before the update of one step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub adversarial: f64,
    pub classification: f64,
    pub reconstruction: f64,
    pub total: f64,
}

pub const TRAINING_LOG_HEADER: &str = "step,adversarial,classification,reconstruction,total";

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: TranslatorCheckpoint,
    pub log: Vec<StepLog>,
    /// Dataset record indices of each step's batch.
    pub batches: Vec<Vec<usize>>,
}

impl TrainOutcome {
    /// One line per step: space-separated record indices.
    pub fn batch_manifest(&self) -> String {
        self.batches
            .iter()
            .map(|b| b.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ") + "\n")
            .collect()
    }
}

pub fn write_training_log(path: &Path, log: &[StepLog]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in log {
        w.serialize(row).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    let mut bytes = w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    if log.is_empty() {
        bytes = format!("{TRAINING_LOG_HEADER}\n").into_bytes();
    }
    crate::archive::write_atomic(path, &bytes)
}

/// Appends one row (creating the file with a header if needed).
pub fn append_training_log(path: &Path, row: &StepLog) -> Result<()> {
    let exists = path.exists();
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut line = String::new();
    if !exists {
        line.push_str(TRAINING_LOG_HEADER);
        line.push('\n');
    }
    line.push_str(&format!(
        "{},{},{},{},{}\n",
        row.step, row.adversarial, row.classification, row.reconstruction, row.total
    ));
    f.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Trains the translator on `dataset`, whose images must already be
/// `image_size`×`image_size`×1. Batches are drawn from a per-epoch shuffle
/// seeded by `config.seed`; targets are drawn uniformly from the classes
/// present in the dataset.
pub fn train_translator(dataset: &FaceDataset, config: &GanTrainConfig) -> Result<TrainOutcome> {
    train_translator_with(dataset, config, |_| {})
}

/// Like [`train_translator`], calling `on_step` after every step.
pub fn train_translator_with(
    dataset: &FaceDataset,
    config: &GanTrainConfig,
    mut on_step: impl FnMut(&StepLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("translator training set".into()));
    }
    if dataset.classes_present() < 2 {
        return Err(Error::SingleClassDataset);
    }
    let s = config.image_size;
    for r in dataset.records() {
        if r.image.shape() != (s, s, 1) {
            return Err(Error::shape(format!("{s}x{s}x1 training images"), format!("{:?}", r.image.shape())));
        }
    }
    let classes: Vec<usize> = EmotionLabel::ALL
        .iter()
        .map(|e| e.index())
        .filter(|&c| dataset.per_class_counts()[c] > 0)
        .collect();

    let mut ck = TranslatorCheckpoint::init(config)?;
    let mut g_opt = Optimizer::adam(&ck.generator, config.learning_rates.generator, config.adam_beta1, config.adam_beta2);
    let mut d_opt = Optimizer::adam(
        &ck.discriminator,
        config.learning_rates.discriminator,
        config.adam_beta1,
        config.adam_beta2,
    );
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut label_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let signed: Vec<Vec<f64>> = dataset
        .records()
        .iter()
        .map(|r| r.image.data().iter().map(|&v| to_signed(v as f64)).collect())
        .collect();
    let batch_size = config.batch_size.min(dataset.len());
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut log = Vec::with_capacity(config.steps);
    let mut batches = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        if cursor + batch_size > order.len() {
            order = (0..dataset.len()).collect();
            order.shuffle(&mut order_rng);
            cursor = 0;
        }
        let idx = order[cursor..cursor + batch_size].to_vec();
        cursor += batch_size;
        let samples: Vec<&[f64]> = idx.iter().map(|&i| signed[i].as_slice()).collect();
        let images = Tensor::stack([1, s, s], &samples);
        let sources: Vec<usize> = idx.iter().map(|&i| dataset.records()[i].emotion.index()).collect();

        for _ in 0..config.critic_steps {
            let targets: Vec<usize> = (0..batch_size)
                .map(|_| classes[label_rng.random_range(0..classes.len())])
                .collect();
            let mix: Vec<f64> = (0..batch_size).map(|_| label_rng.random::<f64>()).collect();
            let batch = TranslatorBatch::new(images.clone(), sources.clone(), targets)?;
            let (dl, dg) = discriminator_gradients(&setup(&ck, config), &batch, &mix)?;
            if !dl.total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step,
                    what: format!("discriminator loss {dl:?}"),
                });
            }
            d_opt.apply(&mut ck.discriminator, &dg);
        }

        let targets: Vec<usize> = (0..batch_size)
            .map(|_| classes[label_rng.random_range(0..classes.len())])
            .collect();
        let batch = TranslatorBatch::new(images, sources, targets)?;
        let (gl, gg) = generator_gradients(&setup(&ck, config), &batch)?;
        if !gl.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                what: format!("generator loss {gl:?}"),
            });
        }
        if !config.identity_generator {
            g_opt.apply(&mut ck.generator, &gg);
        }
        let row = StepLog {
            step,
            adversarial: gl.adversarial,
            classification: gl.classification,
            reconstruction: gl.reconstruction,
            total: gl.total,
        };
        on_step(&row);
        log.push(row);
        batches.push(idx);
        if step % 100 == 0 {
            log::debug!("translator step {step}: {gl:?}");
        }
    }
    if !ck.generator.is_finite() || !ck.discriminator.is_finite() {
        return Err(Error::NonFiniteLoss {
            step: config.steps,
            what: "parameters".into(),
        });
    }
    ck.step = config.steps as u64;
    Ok(TrainOutcome {
        checkpoint: ck,
        log,
        batches,
    })
}

fn setup<'a>(ck: &'a TranslatorCheckpoint, config: &GanTrainConfig) -> LossSetup<'a> {
    LossSetup {
        generator: &ck.gen_net,
        generator_params: &ck.generator,
        discriminator: &ck.disc_net,
        discriminator_params: &ck.discriminator,
        weights: config.loss_weights,
        adversarial: config.adversarial,
        gradient_penalty_weight: config.gradient_penalty_weight,
    }
}

/// Loss setup over a checkpoint's own networks and config.
pub fn checkpoint_setup(ck: &TranslatorCheckpoint) -> LossSetup<'_> {
    setup(ck, &ck.config)
}
