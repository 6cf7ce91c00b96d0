use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, build_classifier, Classifier, ClassifierSpec};
use crate::data::FaceDataset;
use crate::error::{Error, Result};
use crate::nn::{ops, Optimizer, OptimizerKind, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Seeds both initialization and the per-epoch shuffles.
    pub seed: u64,
    /// Stop after this many epochs without a validation improvement. In
    /// config files `0` means no early stopping.
    #[serde(with = "zero_is_none")]
    pub patience: Option<usize>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            patience: Some(15),
            adam_beta1: 0.9,
            adam_beta2: 0.999,
        }
    }
}

mod zero_is_none {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(v.unwrap_or(0) as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        let v = usize::deserialize(d)?;
        Ok((v > 0).then_some(v))
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("fit.batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "fit.learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.patience == Some(0) {
            return Err(Error::InvalidConfig("fit.patience must be positive when set".into()));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::InvalidConfig("fit adam betas must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Metrics of one epoch. Training metrics are running averages over the
/// epoch's minibatches with dropout active; validation metrics are computed
/// after the epoch at inference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

pub const TRAINING_LOG_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub entries: Vec<EpochLog>,
    /// Epoch whose weights were returned: best validation accuracy, or the
    /// last epoch when there is no validation set.
    pub selected_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl TrainingLog {
    pub fn selected(&self) -> Option<&EpochLog> {
        self.selected_epoch
            .and_then(|e| self.entries.iter().find(|l| l.epoch == e))
    }

    pub fn last(&self) -> Option<&EpochLog> {
        self.entries.last()
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = format!("{TRAINING_LOG_HEADER}\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch,
                e.train_loss,
                e.train_acc,
                opt(e.val_loss),
                opt(e.val_acc)
            ));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::archive::write_atomic(path, self.to_csv().as_bytes())
    }
}

fn tensors(ds: &FaceDataset, model: &Classifier) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let s = model.spec.input_size;
    let mut xs = Vec::with_capacity(ds.len());
    for r in ds.records() {
        if r.image.shape() != (s, s, 1) {
            return Err(Error::shape(format!("{s}x{s}x1"), format!("{:?}", r.image.shape())));
        }
        xs.push(r.image.to_f64());
    }
    Ok((xs, ds.records().iter().map(|r| r.emotion.index()).collect()))
}

/// Mean loss and accuracy at inference.
fn evaluate_split(model: &Classifier, xs: &[Vec<f64>], ys: &[usize]) -> (f64, f64) {
    let s = model.spec.input_size;
    let mut loss = 0.0;
    let mut correct = 0;
    for (cx, cy) in xs.chunks(64).zip(ys.chunks(64)) {
        let samples: Vec<&[f64]> = cx.iter().map(Vec::as_slice).collect();
        let logits = model.net().infer(&model.params, &Tensor::stack([1, s, s], &samples));
        let (l, _) = ops::softmax_cross_entropy(&logits, cy);
        loss += l * cy.len() as f64;
        correct += (0..cy.len()).filter(|&i| argmax(logits.sample(i)) == cy[i]).count();
    }
    (loss / ys.len() as f64, correct as f64 / ys.len() as f64)
}

/// Trains a fresh classifier. Returns the weights of the selected epoch
/// (see [`TrainingLog::selected_epoch`]) and the per-epoch log.
pub fn train_classifier(
    train: &FaceDataset,
    val: &FaceDataset,
    spec: &ClassifierSpec,
    config: &FitConfig,
) -> Result<(Classifier, TrainingLog)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("classifier training set".into()));
    }
    if train.classes_present() < 2 {
        return Err(Error::SingleClassDataset);
    }
    let mut model = build_classifier(spec, config.seed)?;
    let (xs, ys) = tensors(train, &model)?;
    let (vx, vy) = tensors(val, &model)?;
    let mut opt = Optimizer::new(
        config.optimizer,
        &model.params,
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
    );
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xd50f);
    let s = spec.input_size;
    let mut log = TrainingLog::default();
    let mut best: Option<(f64, Classifier)> = None;
    let mut since_best = 0;

    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for idx in order.chunks(config.batch_size) {
            let samples: Vec<&[f64]> = idx.iter().map(|&i| xs[i].as_slice()).collect();
            let targets: Vec<usize> = idx.iter().map(|&i| ys[i]).collect();
            let x = Tensor::stack([1, s, s], &samples);
            let (logits, tape) = model.net().forward(&model.params, &x, Some(&mut dropout_rng));
            let (loss, dlogits) = ops::softmax_cross_entropy(&logits, &targets);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step: epoch,
                    what: "classifier training loss".into(),
                });
            }
            loss_sum += loss * idx.len() as f64;
            correct += (0..idx.len()).filter(|&i| argmax(logits.sample(i)) == targets[i]).count();
            let mut grads = model.params.zeros_like();
            model.net().backward_params(&model.params, tape, dlogits, &mut grads);
            opt.apply(&mut model.params, &grads);
        }
        let (val_loss, val_acc) = if vy.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate_split(&model, &vx, &vy);
            (Some(l), Some(a))
        };
        log.entries.push(EpochLog {
            epoch,
            train_loss: loss_sum / xs.len() as f64,
            train_acc: correct as f64 / xs.len() as f64,
            val_loss,
            val_acc,
        });
        log::debug!("epoch {epoch}: {:?}", log.entries.last());

        if let Some(acc) = val_acc {
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, model.clone()));
                log.selected_epoch = Some(epoch);
                since_best = 0;
            } else {
                since_best += 1;
                if config.patience.is_some_and(|p| since_best >= p) {
                    log.stopped_early = true;
                    break;
                }
            }
        } else {
            log.selected_epoch = Some(epoch);
        }
    }
    let chosen = match best {
        Some((_, m)) => m,
        None => model,
    };
    Ok((chosen, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LabeledFace, Provenance};
    use crate::emotion::EmotionLabel;
    use crate::procedural::{toy_corpus, FaceStyle};

    fn toy(n: usize, seed: u64) -> FaceDataset {
        FaceDataset::new(
            toy_corpus("c", n, 16, 1, &FaceStyle::studio(), seed)
                .into_iter()
                .map(|f| LabeledFace::new(f.image, f.emotion, format!("{}-{seed}", f.identity_id), Provenance::Real, "toy"))
                .collect(),
        )
        .unwrap()
    }

    fn spec() -> ClassifierSpec {
        ClassifierSpec::shrunken(16, [4, 4, 8, 8], 16)
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let cfg = FitConfig {
            epochs: 0,
            ..Default::default()
        };
        let (m, log) = train_classifier(&toy(2, 0), &FaceDataset::default(), &spec(), &cfg).unwrap();
        assert_eq!(m, build_classifier(&spec(), 0).unwrap());
        assert!(log.entries.is_empty());
    }

    #[test]
    fn deterministic_logs() {
        let cfg = FitConfig {
            epochs: 3,
            batch_size: 8,
            ..Default::default()
        };
        let a = train_classifier(&toy(3, 0), &toy(1, 1), &spec(), &cfg).unwrap();
        let b = train_classifier(&toy(3, 0), &toy(1, 1), &spec(), &cfg).unwrap();
        assert_eq!(a.1, b.1);
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.entries.len(), 3);
    }

    #[test]
    fn rejects_degenerate_training_sets() {
        let cfg = FitConfig::default();
        assert!(matches!(
            train_classifier(&FaceDataset::default(), &FaceDataset::default(), &spec(), &cfg),
            Err(Error::EmptyDataset(_))
        ));
        let one = toy(2, 0).filter(|r| r.emotion == EmotionLabel::Anger);
        assert!(matches!(
            train_classifier(&one, &FaceDataset::default(), &spec(), &cfg),
            Err(Error::SingleClassDataset)
        ));
    }

    #[test]
    fn csv_layout() {
        let log = TrainingLog {
            entries: vec![EpochLog {
                epoch: 1,
                train_loss: 1.5,
                train_acc: 0.25,
                val_loss: None,
                val_acc: None,
            }],
            selected_epoch: Some(1),
            stopped_early: false,
        };
        assert_eq!(log.to_csv(), format!("{TRAINING_LOG_HEADER}\n1,1.5,0.25,,\n"));
    }
}
