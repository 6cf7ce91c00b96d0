//! Identity sources: where the neutral face of a new subject comes from.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::archive;
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::nn::ops::ConvGeometry;
use crate::nn::{Layer, Params, Sequential, Tensor};
use crate::procedural::{self, ExpressionGeometry, FaceStyle, IdentityTraits};

/// Fixed-length latent code seeding one identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentVector {
    values: Vec<f64>,
}

impl LatentVector {
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self> {
        if values.len() != dim {
            return Err(Error::shape(format!("latent of length {dim}"), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("latent vector has non-finite entries".into()));
        }
        Ok(LatentVector { values })
    }

    /// Standard-normal latent for identity `index` under `seed`.
    pub fn sample(dim: usize, seed: u64, index: u64) -> Self {
        LatentVector {
            values: procedural::identity_latent(seed, index, dim),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Stable 64-bit hash of the exact bit patterns.
    pub fn hash64(&self) -> u64 {
        let mut h = Sha256::new();
        for v in &self.values {
            h.update(v.to_bits().to_le_bytes());
        }
        u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
    }
}

/// Archive kind of identity-decoder checkpoints.
pub const IDENTITY_DECODER_KIND: &str = "identity-generator";

/// Architecture of a latent-to-face decoder: dense to a 4×4 map, then
/// repeated (upsample, conv3, leaky ReLU) up to `image_size`, then a conv3
/// to one channel and tanh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderSpec {
    pub latent_dim: usize,
    pub image_size: usize,
    pub channels: usize,
}

/// Pretrained generative identity model loaded from an archive.
#[derive(Clone, Debug)]
pub struct IdentityDecoder {
    pub spec: DecoderSpec,
    head: Sequential,
    body: Sequential,
    params: Params,
}

impl IdentityDecoder {
    fn architecture(spec: &DecoderSpec, params: &mut Params, rng: &mut ChaCha8Rng) -> Result<(Sequential, Sequential)> {
        if spec.image_size < 8 || !spec.image_size.is_power_of_two() || spec.channels == 0 || spec.latent_dim == 0 {
            return Err(Error::InvalidConfig(format!("bad identity decoder spec {spec:?}")));
        }
        let c = spec.channels;
        let dense = params.push_layer("dense", vec![spec.latent_dim, c * 16], spec.latent_dim, c * 16, rng);
        let head = Sequential::new(vec![Layer::Dense { param: dense }, Layer::LeakyRelu(0.2)]);
        let mut layers = Vec::new();
        let mut side = 4;
        let mut i = 0;
        while side < spec.image_size {
            let p = params.push_layer(&format!("up{i}"), vec![c, c * 9], c * 9, c, rng);
            layers.push(Layer::Upsample2);
            layers.push(Layer::Conv {
                geo: ConvGeometry {
                    in_channels: c,
                    out_channels: c,
                    kernel: 3,
                    stride: 1,
                    padding: 1,
                },
                param: p,
            });
            layers.push(Layer::LeakyRelu(0.2));
            side *= 2;
            i += 1;
        }
        let p = params.push_layer("out", vec![1, c * 9], c * 9, 1, rng);
        layers.push(Layer::Conv {
            geo: ConvGeometry {
                in_channels: c,
                out_channels: 1,
                kernel: 3,
                stride: 1,
                padding: 1,
            },
            param: p,
        });
        layers.push(Layer::Tanh);
        Ok((head, Sequential::new(layers)))
    }

    /// Randomly initialized decoder; mostly useful for tests and as a
    /// template for converting external weights.
    pub fn random(spec: DecoderSpec, seed: u64) -> Result<Self> {
        let mut params = Params::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (head, body) = Self::architecture(&spec, &mut params, &mut rng)?;
        Ok(IdentityDecoder { spec, head, body, params })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        archive::write(
            path,
            IDENTITY_DECODER_KIND,
            &archive::digest(&self.spec),
            0,
            serde_json::to_value(&self.spec)?,
            &[("decoder", &self.params)],
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let a = archive::read(path)?;
        if a.meta.kind != IDENTITY_DECODER_KIND {
            return Err(Error::Checkpoint(format!(
                "{}: expected kind {IDENTITY_DECODER_KIND:?}, found {:?}",
                path.display(),
                a.meta.kind
            )));
        }
        let spec: DecoderSpec = serde_json::from_value(a.meta.extra.clone())?;
        let mut template = Self::random(spec, 0)?;
        let params = a
            .group("decoder")
            .ok_or_else(|| Error::Checkpoint("missing decoder group".into()))?;
        if !params.same_layout(&template.params) {
            return Err(Error::Checkpoint("decoder weights do not match the declared spec".into()));
        }
        template.params = params.clone();
        Ok(template)
    }

    pub fn decode(&self, latent: &LatentVector) -> Result<ImageTensor> {
        if latent.len() != self.spec.latent_dim {
            return Err(Error::shape(format!("latent of length {}", self.spec.latent_dim), latent.len()));
        }
        let x = Tensor::from_vec([1, latent.len(), 1, 1], latent.values().to_vec());
        let h = self.head.infer(&self.params, &x).reshape([1, self.spec.channels, 4, 4]);
        let y = self.body.infer(&self.params, &h);
        let s = self.spec.image_size;
        let data: Vec<f64> = y.data().iter().map(|v| ((v + 1.0) / 2.0).clamp(0.0, 1.0)).collect();
        ImageTensor::from_f64(s, s, 1, &data)
    }
}

/// Config-file description of an identity source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentitySourceConfig {
    /// `procedural`, `corpus-sampler` or `generative-model`.
    pub kind: String,
    /// Render size of procedural faces.
    pub image_size: usize,
    /// `studio` or `field`.
    pub style: String,
    /// Manifest of the corpus to sample from (corpus-sampler).
    pub corpus_manifest: Option<PathBuf>,
    /// Decoder archive (generative-model).
    pub checkpoint: Option<PathBuf>,
}

impl Default for IdentitySourceConfig {
    fn default() -> Self {
        IdentitySourceConfig {
            kind: "procedural".into(),
            image_size: 64,
            style: "studio".into(),
            corpus_manifest: None,
            checkpoint: None,
        }
    }
}

pub fn style_by_name(name: &str) -> Result<FaceStyle> {
    match name {
        "studio" => Ok(FaceStyle::studio()),
        "field" => Ok(FaceStyle::field()),
        other => Err(Error::InvalidConfig(format!("unknown face style {other:?}"))),
    }
}

impl IdentitySourceConfig {
    /// Checks everything that can be checked without loading files.
    pub fn validate(&self) -> Result<()> {
        match self.kind.as_str() {
            "procedural" => {
                style_by_name(&self.style)?;
                if self.image_size < 8 {
                    return Err(Error::InvalidConfig("identity_source.image_size must be >= 8".into()));
                }
            }
            "corpus-sampler" => {
                if self.corpus_manifest.is_none() {
                    return Err(Error::InvalidConfig("corpus-sampler needs identity_source.corpus_manifest".into()));
                }
            }
            "generative-model" => {
                if self.checkpoint.is_none() {
                    return Err(Error::InvalidConfig("generative-model needs identity_source.checkpoint".into()));
                }
            }
            other => return Err(Error::UnknownIdentitySource(other.to_string())),
        }
        Ok(())
    }
}

/// A source of neutral identity faces.
#[derive(Clone, Debug)]
pub enum IdentitySource {
    GenerativeModel(IdentityDecoder),
    /// Picks `images[hash(latent) mod n]`.
    CorpusSampler(Vec<ImageTensor>),
    Procedural { image_size: usize, style: FaceStyle },
}

impl IdentitySource {
    /// Builds a source from config; relative paths resolve against `base`.
    pub fn from_config(cfg: &IdentitySourceConfig, base: &Path) -> Result<Self> {
        cfg.validate()?;
        match cfg.kind.as_str() {
            "procedural" => Ok(IdentitySource::Procedural {
                image_size: cfg.image_size,
                style: style_by_name(&cfg.style)?,
            }),
            "corpus-sampler" => {
                let manifest = base.join(cfg.corpus_manifest.as_ref().expect("validated"));
                let ds = crate::data::load_corpus(&manifest)?;
                let images = ds.into_records().into_iter().map(|r| r.image).collect::<Vec<_>>();
                if images.is_empty() {
                    return Err(Error::EmptyCorpus);
                }
                Ok(IdentitySource::CorpusSampler(images))
            }
            "generative-model" => Ok(IdentitySource::GenerativeModel(IdentityDecoder::load(
                &base.join(cfg.checkpoint.as_ref().expect("validated")),
            )?)),
            other => Err(Error::UnknownIdentitySource(other.to_string())),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            IdentitySource::GenerativeModel(_) => "generative-model",
            IdentitySource::CorpusSampler(_) => "corpus-sampler",
            IdentitySource::Procedural { .. } => "procedural",
        }
    }

    /// Latent length required, if the source constrains it.
    pub fn latent_dim(&self) -> Option<usize> {
        match self {
            IdentitySource::GenerativeModel(d) => Some(d.spec.latent_dim),
            _ => None,
        }
    }

    /// A neutral face for `latent`. Deterministic in `(self, latent)`.
    pub fn generate_identity(&self, latent: &LatentVector) -> Result<ImageTensor> {
        match self {
            IdentitySource::GenerativeModel(d) => d.decode(latent),
            IdentitySource::CorpusSampler(images) => {
                if images.is_empty() {
                    return Err(Error::EmptyCorpus);
                }
                Ok(images[(latent.hash64() % images.len() as u64) as usize].clone())
            }
            IdentitySource::Procedural { image_size, style } => {
                let traits = IdentityTraits::from_latent(latent.values());
                Ok(procedural::render_face(
                    &traits,
                    &ExpressionGeometry::NEUTRAL,
                    style,
                    *image_size,
                    1,
                    latent.hash64(),
                ))
            }
        }
    }
}
