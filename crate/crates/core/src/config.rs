//! The pipeline configuration document (TOML) and its resolution: relative
//! paths are anchored at the file's directory, and the global seed is
//! propagated into every sub-config.

use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{PreprocessConfig, SplitSpec};
use crate::error::{Error, Result};
use crate::gan::{GanTrainConfig, IdentitySourceConfig};
use crate::model::{ClassifierSpec, FitConfig};
use crate::sweep::{ExperimentPlan, HeldoutSpec, DEFAULT_FORGETTING_MARGIN};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Real corpus; trains the translator and forms the RFEs of the sweep.
    pub real_manifest: Option<PathBuf>,
    /// Generated pool. Defaults to `{output_dir}/generated/manifest.csv`.
    pub generated_manifest: Option<PathBuf>,
    /// Defaults to `{output_dir}/translator/translator.ckpt`.
    pub translator_checkpoint: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Preprocessing cache; `FERAUG_CACHE_DIR` overrides it.
    pub cache_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            real_manifest: None,
            generated_manifest: None,
            translator_checkpoint: None,
            output_dir: PathBuf::from("runs"),
            cache_dir: PathBuf::from("cache"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub identities: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig { identities: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub k_values: Vec<i64>,
    /// Repeated trials; classifier seeds are `seed, seed + 1, ...`.
    pub repeats: usize,
    pub workers: usize,
    pub forgetting_margin: f64,
    pub synthetic_baseline: bool,
    pub heldout: Vec<HeldoutSpec>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            k_values: vec![1, 2, 3, 4, 5, 6, 10, 15, 20],
            repeats: 1,
            workers: 1,
            forgetting_margin: DEFAULT_FORGETTING_MARGIN,
            synthetic_baseline: true,
            heldout: Vec::new(),
        }
    }
}

/// Everything one run of the pipeline needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Drives the translator, generation, split and classifier seeds.
    pub seed: u64,
    pub paths: PathsConfig,
    pub identity_source: IdentitySourceConfig,
    pub gan: GanTrainConfig,
    /// Classifier-side preprocessing; its crop fraction also applies to
    /// translator inputs.
    pub preprocess: PreprocessConfig,
    pub classifier: ClassifierSpec,
    pub fit: FitConfig,
    pub split: SplitSpec,
    pub generate: GenerateConfig,
    pub sweep: SweepConfig,
}

/// Lexical normalization of `base.join(p)`.
fn anchor(base: &Path, p: &Path) -> PathBuf {
    let joined = base.join(p);
    let mut out = PathBuf::new();
    for c in joined.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            other => out.push(other.as_os_str()),
        }
    }
    out
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    /// Reads `path` and anchors its relative paths at the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", path.display())),
            e => e,
        })?;
        let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let dir = std::path::absolute(dir).map_err(|e| Error::io(dir, e))?;
        cfg.anchor_paths(&dir);
        Ok(cfg)
    }

    /// Makes every relative path absolute against `base`.
    pub fn anchor_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [&mut p.real_manifest, &mut p.generated_manifest, &mut p.translator_checkpoint] {
            if let Some(v) = slot.as_mut() {
                *v = anchor(base, v);
            }
        }
        p.output_dir = anchor(base, &p.output_dir);
        p.cache_dir = anchor(base, &p.cache_dir);
        let src = &mut self.identity_source;
        for slot in [&mut src.corpus_manifest, &mut src.checkpoint] {
            if let Some(v) = slot.as_mut() {
                *v = anchor(base, v);
            }
        }
        for h in &mut self.sweep.heldout {
            h.manifest = anchor(base, &h.manifest);
        }
    }

    /// Sets the global seed and every seed derived from it.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.gan.seed = seed;
        self.split.seed = seed;
        self.fit.seed = seed;
    }

    /// Checks every sub-config. Paths are checked per command.
    pub fn validate(&self) -> Result<()> {
        self.identity_source.validate()?;
        self.gan.validate()?;
        self.preprocess.validate()?;
        self.classifier.validate()?;
        self.fit.validate()?;
        self.split.validate()?;
        if self.generate.identities == 0 {
            return Err(Error::InvalidConfig("generate.identities must be positive".into()));
        }
        if self.sweep.repeats == 0 {
            return Err(Error::InvalidConfig("sweep.repeats must be positive".into()));
        }
        self.plan().validate()
    }

    pub fn output_dir(&self) -> &Path {
        &self.paths.output_dir
    }

    pub fn translator_checkpoint(&self) -> PathBuf {
        self.paths
            .translator_checkpoint
            .clone()
            .unwrap_or_else(|| self.paths.output_dir.join("translator").join("translator.ckpt"))
    }

    pub fn generated_dir(&self) -> PathBuf {
        self.paths.output_dir.join("generated")
    }

    pub fn generated_manifest(&self) -> PathBuf {
        self.paths
            .generated_manifest
            .clone()
            .unwrap_or_else(|| self.generated_dir().join("manifest.csv"))
    }

    pub fn real_manifest(&self) -> Result<&Path> {
        self.paths
            .real_manifest
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("paths.real_manifest is not set".into()))
    }

    /// The sweep as configured here.
    pub fn plan(&self) -> ExperimentPlan {
        ExperimentPlan {
            k_values: self.sweep.k_values.clone(),
            real_manifest: self.paths.real_manifest.clone().unwrap_or_default(),
            generated_pool_manifest: self.generated_manifest(),
            split: self.split.clone(),
            fit: self.fit.clone(),
            classifier: self.classifier.clone(),
            preprocess: self.preprocess.clone(),
            heldout: self.sweep.heldout.clone(),
            seeds: (0..self.sweep.repeats as u64).map(|i| self.seed.wrapping_add(i)).collect(),
            synthetic_baseline: self.sweep.synthetic_baseline,
            workers: self.sweep.workers,
            forgetting_margin: self.sweep.forgetting_margin,
        }
    }

    /// Translator-side preprocessing of real faces.
    pub fn translator_preprocess(&self) -> PreprocessConfig {
        PreprocessConfig {
            output_size: self.gan.image_size,
            crop_fraction: self.preprocess.crop_fraction,
        }
    }
}

/// Errors with a message naming `path` unless it exists.
pub fn require_exists(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{what} not found: {}", path.display())))
    }
}
