//! The six-class CNN classifier: construction, inference, training and
//! checkpoints.

mod fit;
mod spec;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use fit::{train_classifier, EpochLog, FitConfig, TrainingLog, TRAINING_LOG_HEADER};
pub use spec::{render_summary, ClassifierSpec, LayerKind, LayerSummary, DROPOUT_RATES};

use crate::archive;
use crate::data::FaceDataset;
use crate::emotion::NUM_EMOTIONS;
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::nn::{ops, Grads, Params, Sequential, Tensor};

/// Archive kind of classifier checkpoints.
pub const CLASSIFIER_KIND: &str = "fer-classifier";

/// Weights of one classifier plus the spec they belong to.
#[derive(Clone, Debug)]
pub struct Classifier {
    pub spec: ClassifierSpec,
    pub params: Params,
    pub spec_digest: String,
    net: Sequential,
}

impl PartialEq for Classifier {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.params == other.params
    }
}

/// Seeded He initialization of `spec`.
pub fn build_classifier(spec: &ClassifierSpec, seed: u64) -> Result<Classifier> {
    spec.validate()?;
    let (net, params) = spec.build(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Classifier {
        spec: spec.clone(),
        params,
        spec_digest: spec.digest(),
        net,
    })
}

impl Classifier {
    pub(crate) fn net(&self) -> &Sequential {
        &self.net
    }

    /// Index of the final dense weight tensor.
    pub fn final_layer_index(&self) -> usize {
        self.params.len() - 2
    }

    fn check(&self, image: &ImageTensor) -> Result<()> {
        let s = self.spec.input_size;
        if image.shape() != (s, s, 1) {
            return Err(Error::shape(format!("{s}x{s}x1"), format!("{:?}", image.shape())));
        }
        Ok(())
    }

    pub(crate) fn batch_tensor(&self, images: &[&ImageTensor]) -> Result<Tensor> {
        let s = self.spec.input_size;
        let mut data = Vec::with_capacity(images.len() * s * s);
        for img in images {
            self.check(img)?;
            data.extend(img.data().iter().map(|&v| v as f64));
        }
        Ok(Tensor::from_vec([images.len(), 1, s, s], data))
    }

    /// Class probabilities per image; dropout inactive.
    pub fn forward(&self, images: &[&ImageTensor]) -> Result<Vec<[f64; NUM_EMOTIONS]>> {
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(64) {
            let logits = self.net.infer(&self.params, &self.batch_tensor(chunk)?);
            for i in 0..chunk.len() {
                let p = ops::softmax(logits.sample(i));
                let mut row = [0.0; NUM_EMOTIONS];
                row.copy_from_slice(&p);
                out.push(row);
            }
        }
        Ok(out)
    }

    /// Argmax class per image (lowest index on ties).
    pub fn predict(&self, images: &[&ImageTensor]) -> Result<Vec<usize>> {
        Ok(self.forward(images)?.iter().map(|p| argmax(p)).collect())
    }

    /// Mean cross-entropy of `labels` under `params` (dropout inactive).
    pub fn loss_with(&self, params: &Params, images: &[&ImageTensor], labels: &[usize]) -> Result<f64> {
        if images.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: images.len(),
                right: labels.len(),
            });
        }
        let logits = self.net.infer(params, &self.batch_tensor(images)?);
        Ok(ops::softmax_cross_entropy(&logits, labels).0)
    }

    /// Mean cross-entropy with dropout inactive, and its gradient with
    /// respect to every parameter.
    pub fn loss_and_gradients(&self, images: &[&ImageTensor], labels: &[usize]) -> Result<(f64, Grads)> {
        if images.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: images.len(),
                right: labels.len(),
            });
        }
        let (logits, tape) = self.net.forward(&self.params, &self.batch_tensor(images)?, None);
        let (loss, dlogits) = ops::softmax_cross_entropy(&logits, labels);
        let mut grads = self.params.zeros_like();
        self.net.backward_params(&self.params, tape, dlogits, &mut grads);
        Ok((loss, grads))
    }

    pub fn predict_dataset(&self, dataset: &FaceDataset) -> Result<Vec<usize>> {
        let images: Vec<&ImageTensor> = dataset.records().iter().map(|r| &r.image).collect();
        self.predict(&images)
    }

    pub fn save(&self, path: &Path, extra: serde_json::Value) -> Result<()> {
        let doc = serde_json::json!({ "spec": self.spec, "info": extra });
        archive::write(path, CLASSIFIER_KIND, &self.spec_digest, 0, doc, &[("classifier", &self.params)])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let a = archive::read(path)?;
        if a.meta.kind != CLASSIFIER_KIND {
            return Err(Error::Checkpoint(format!(
                "{}: expected kind {CLASSIFIER_KIND:?}, found {:?}",
                path.display(),
                a.meta.kind
            )));
        }
        let spec: ClassifierSpec = serde_json::from_value(a.meta.extra["spec"].clone())?;
        if spec.digest() != a.meta.config_digest {
            return Err(Error::Checkpoint("classifier spec digest mismatch".into()));
        }
        let mut c = build_classifier(&spec, 0)?;
        let p = a
            .group("classifier")
            .ok_or_else(|| Error::Checkpoint("missing classifier group".into()))?;
        if !p.same_layout(&c.params) {
            return Err(Error::Checkpoint("classifier weights do not match the spec".into()));
        }
        c.params = p.clone();
        Ok(c)
    }
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ClassifierSpec {
        ClassifierSpec::shrunken(16, [2, 2, 4, 4], 8)
    }

    #[test]
    fn same_seed_same_weights() {
        assert_eq!(build_classifier(&small(), 3).unwrap(), build_classifier(&small(), 3).unwrap());
        assert_ne!(build_classifier(&small(), 3).unwrap(), build_classifier(&small(), 4).unwrap());
    }

    #[test]
    fn parameter_count_matches_params() {
        for spec in [small(), ClassifierSpec::default()] {
            let c = build_classifier(&spec, 0).unwrap();
            assert_eq!(c.params.scalar_count(), spec.parameter_count());
        }
    }

    #[test]
    fn rows_are_probabilities_and_zero_head_is_uniform() {
        let mut c = build_classifier(&small(), 0).unwrap();
        let a = ImageTensor::filled(16, 16, 1, 0.3);
        let b = ImageTensor::filled(16, 16, 1, 0.7);
        let out = c.forward(&[&a, &b, &a]).unwrap();
        for row in &out {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
        assert_eq!(out[0], out[2]);
        let k = c.final_layer_index();
        c.params.tensors[k].data.iter_mut().for_each(|v| *v = 0.0);
        c.params.tensors[k + 1].data.iter_mut().for_each(|v| *v = 0.0);
        for v in c.forward(&[&a]).unwrap()[0] {
            assert!((v - 1.0 / 6.0).abs() < 1e-12);
        }
        assert!(c.forward(&[&ImageTensor::filled(8, 8, 1, 0.0)]).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = build_classifier(&small(), 1).unwrap();
        let p = dir.path().join("c.ckpt");
        c.save(&p, serde_json::json!({"note": "x"})).unwrap();
        let back = Classifier::load(&p).unwrap();
        assert_eq!(back.params, archive::round_to_f32(&c.params));
        assert_eq!(back.spec, c.spec);
    }
}
