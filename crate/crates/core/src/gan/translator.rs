use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::GanTrainConfig;
use super::networks::{Discriminator, Generator};
use crate::archive;
use crate::data::{FaceBox, LabeledFace, Provenance};
use crate::emotion::{DomainCode, EmotionLabel, NUM_EMOTIONS};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::nn::{ops, Params, Tensor};

/// Archive kind of translator checkpoints.
pub const TRANSLATOR_KIND: &str = "expression-translator";

/// Tag written into `source_db` of every generated face.
pub const GENERATED_DB: &str = "generated";

/// Trained (or freshly initialized) translator weights plus the config that
/// defines their architecture.
#[derive(Clone, Debug)]
pub struct TranslatorCheckpoint {
    pub config: GanTrainConfig,
    pub generator: Params,
    pub discriminator: Params,
    pub step: u64,
    pub config_digest: String,
    pub(crate) gen_net: Generator,
    pub(crate) disc_net: Discriminator,
}

impl PartialEq for TranslatorCheckpoint {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.generator == other.generator
            && self.discriminator == other.discriminator
            && self.step == other.step
            && self.config_digest == other.config_digest
    }
}

/// `[0,1]` storage intensities to the generator's `[-1,1]`.
pub fn to_signed(v: f64) -> f64 {
    2.0 * v - 1.0
}

pub fn to_unit(v: f64) -> f64 {
    ((v + 1.0) / 2.0).clamp(0.0, 1.0)
}

impl TranslatorCheckpoint {
    /// Step-0 checkpoint: networks initialized from `config.seed`.
    pub fn init(config: &GanTrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (gen_net, generator) = Generator::build(
            config.image_size,
            config.generator_width,
            config.identity_generator,
            &mut rng,
        );
        let (disc_net, discriminator) = Discriminator::build(config.image_size, config.discriminator_width, &mut rng);
        Ok(TranslatorCheckpoint {
            config: config.clone(),
            generator,
            discriminator,
            step: 0,
            config_digest: config.digest(),
            gen_net,
            disc_net,
        })
    }

    pub fn image_size(&self) -> usize {
        self.config.image_size
    }

    pub fn generator_net(&self) -> &Generator {
        &self.gen_net
    }

    pub fn discriminator_net(&self) -> &Discriminator {
        &self.disc_net
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        archive::write(
            path,
            TRANSLATOR_KIND,
            &self.config_digest,
            self.step,
            serde_json::to_value(&self.config)?,
            &[("generator", &self.generator), ("discriminator", &self.discriminator)],
        )
    }

    /// Loads and checks kind, config digest and parameter layout.
    pub fn load(path: &Path) -> Result<Self> {
        let a = archive::read(path)?;
        if a.meta.kind != TRANSLATOR_KIND {
            return Err(Error::Checkpoint(format!(
                "{}: expected kind {TRANSLATOR_KIND:?}, found {:?}",
                path.display(),
                a.meta.kind
            )));
        }
        let config: GanTrainConfig = serde_json::from_value(a.meta.extra.clone())?;
        if config.digest() != a.meta.config_digest {
            return Err(Error::Checkpoint(format!(
                "{}: config digest mismatch (stored {}, recomputed {})",
                path.display(),
                a.meta.config_digest,
                config.digest()
            )));
        }
        let mut ck = Self::init(&config)?;
        for (group, slot) in [("generator", &mut ck.generator), ("discriminator", &mut ck.discriminator)] {
            let p = a
                .group(group)
                .ok_or_else(|| Error::Checkpoint(format!("missing group {group:?}")))?;
            if !p.same_layout(slot) {
                return Err(Error::Checkpoint(format!(
                    "{group} parameters do not match the configured architecture"
                )));
            }
            *slot = p.clone();
        }
        ck.step = a.meta.step;
        Ok(ck)
    }

    fn check_image(&self, image: &ImageTensor) -> Result<()> {
        let s = self.image_size();
        if image.shape() != (s, s, 1) {
            return Err(Error::shape(format!("{s}x{s}x1"), format!("{:?}", image.shape())));
        }
        Ok(())
    }

    fn signed_batch(&self, images: &[&ImageTensor]) -> Result<Tensor> {
        let s = self.image_size();
        let mut data = Vec::with_capacity(images.len() * s * s);
        for img in images {
            self.check_image(img)?;
            data.extend(img.data().iter().map(|&v| to_signed(v as f64)));
        }
        Ok(Tensor::from_vec([images.len(), 1, s, s], data))
    }

    /// Translates each image to its target class.
    pub fn translate_batch(&self, images: &[&ImageTensor], targets: &[EmotionLabel]) -> Result<Vec<ImageTensor>> {
        if images.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: images.len(),
                right: targets.len(),
            });
        }
        if images.is_empty() {
            return Ok(Vec::new());
        }
        let x = self.signed_batch(images)?;
        let t: Vec<usize> = targets.iter().map(|e| e.index()).collect();
        let y = self.gen_net.infer(&self.generator, &x, &t);
        let s = self.image_size();
        (0..images.len())
            .map(|i| {
                let d: Vec<f64> = y.sample(i).iter().map(|&v| to_unit(v)).collect();
                ImageTensor::from_f64(s, s, 1, &d)
            })
            .collect()
    }

    /// Realness score and six class logits per image.
    pub fn discriminate_batch(&self, images: &[&ImageTensor]) -> Result<Vec<(f64, [f64; NUM_EMOTIONS])>> {
        if images.is_empty() {
            return Ok(Vec::new());
        }
        let x = self.signed_batch(images)?;
        let out = self.disc_net.infer(&self.discriminator, &x);
        Ok((0..images.len())
            .map(|i| {
                let row = out.sample(i);
                let mut logits = [0.0; NUM_EMOTIONS];
                logits.copy_from_slice(&row[1..]);
                (row[0], logits)
            })
            .collect())
    }
}

/// Re-renders `image` with the expression encoded by `target`. Output has
/// the input's shape and values in [0,1].
pub fn translate(checkpoint: &TranslatorCheckpoint, image: &ImageTensor, target: &DomainCode) -> Result<ImageTensor> {
    let target = DomainCode::from_slice(target.values())?.emotion();
    Ok(checkpoint.translate_batch(&[image], &[target])?.remove(0))
}

/// `(realness, class logits)` of one image.
pub fn discriminator_forward(
    checkpoint: &TranslatorCheckpoint,
    image: &ImageTensor,
) -> Result<(f64, [f64; NUM_EMOTIONS])> {
    Ok(checkpoint.discriminate_batch(&[image])?.remove(0))
}

/// Class probabilities from discriminator logits.
pub fn logits_to_probabilities(logits: &[f64; NUM_EMOTIONS]) -> Vec<f64> {
    ops::softmax(logits)
}

/// One generated face per emotion for a single identity, in label order.
pub fn synthesize_expression_set(
    checkpoint: &TranslatorCheckpoint,
    identity_image: &ImageTensor,
    identity_id: &str,
) -> Result<Vec<LabeledFace>> {
    if identity_id.is_empty() {
        return Err(Error::InvalidConfig("identity id must be nonempty".into()));
    }
    let images = vec![identity_image; NUM_EMOTIONS];
    let out = checkpoint.translate_batch(&images, &EmotionLabel::ALL)?;
    let s = checkpoint.image_size();
    Ok(out
        .into_iter()
        .zip(EmotionLabel::ALL)
        .map(|(img, e)| {
            let mut face = LabeledFace::new(img, e, identity_id, Provenance::Generated, GENERATED_DB);
            face.face_box = Some(FaceBox::full(s, s));
            face
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(identity: bool) -> GanTrainConfig {
        GanTrainConfig {
            image_size: 32,
            generator_width: 2,
            discriminator_width: 2,
            identity_generator: identity,
            ..GanTrainConfig::default()
        }
    }

    #[test]
    fn identity_generator_returns_input() {
        let ck = TranslatorCheckpoint::init(&tiny(true)).unwrap();
        let img = crate::procedural::toy_corpus("t", 1, 32, 1, &Default::default(), 0)[0].image.clone();
        for e in EmotionLabel::ALL {
            let out = translate(&ck, &img, &e.one_hot()).unwrap();
            assert_eq!(out.shape(), img.shape());
            for (a, b) in out.data().iter().zip(img.data()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn translate_checks_shape_and_range() {
        let ck = TranslatorCheckpoint::init(&tiny(false)).unwrap();
        let bad = ImageTensor::filled(16, 16, 1, 0.5);
        assert!(matches!(
            translate(&ck, &bad, &EmotionLabel::Fear.one_hot()),
            Err(Error::ShapeMismatch { .. })
        ));
        let ok = ImageTensor::filled(32, 32, 1, 0.9);
        let out = translate(&ck, &ok, &EmotionLabel::Fear.one_hot()).unwrap();
        assert!(out.in_unit_range());
    }

    #[test]
    fn discriminator_outputs_are_finite() {
        let ck = TranslatorCheckpoint::init(&tiny(false)).unwrap();
        let img = ImageTensor::filled(32, 32, 1, 0.2);
        let (score, logits) = discriminator_forward(&ck, &img).unwrap();
        assert!(score.is_finite() && logits.iter().all(|v| v.is_finite()));
        let p: f64 = logits_to_probabilities(&logits).iter().sum();
        assert!((p - 1.0).abs() < 1e-6);
    }

    #[test]
    fn expression_set_has_one_face_per_emotion() {
        let ck = TranslatorCheckpoint::init(&tiny(false)).unwrap();
        let set = synthesize_expression_set(&ck, &ImageTensor::filled(32, 32, 1, 0.4), "g1").unwrap();
        assert_eq!(set.len(), 6);
        for (f, e) in set.iter().zip(EmotionLabel::ALL) {
            assert_eq!(f.emotion, e);
            assert_eq!(f.identity_id, "g1");
            assert_eq!(f.provenance, Provenance::Generated);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ck = TranslatorCheckpoint::init(&tiny(false)).unwrap();
        let path = dir.path().join("t.ckpt");
        ck.save(&path).unwrap();
        let back = TranslatorCheckpoint::load(&path).unwrap();
        assert_eq!(back.config_digest, ck.config.digest());
        assert_eq!(back.generator, archive::round_to_f32(&ck.generator));
        assert_eq!(back.step, 0);
    }
}
