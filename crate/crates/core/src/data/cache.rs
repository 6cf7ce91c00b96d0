use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{preprocess, FaceBox, PreprocessConfig};
use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// Content-addressed store of preprocessed images. The key covers the
/// source file bytes, the face box and the preprocessing config, so any
/// change to either invalidates the entry. Entries are written with
/// temp-then-rename and never modified.
#[derive(Clone, Debug)]
pub struct PreprocessCache {
    dir: PathBuf,
}

/// Environment variable that overrides the configured cache directory.
pub const CACHE_DIR_ENV: &str = "FERAUG_CACHE_DIR";

impl PreprocessCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(PreprocessCache { dir })
    }

    /// Uses `$FERAUG_CACHE_DIR` when set, else `fallback`.
    pub fn from_env_or(fallback: &Path) -> Result<Self> {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(d) if !d.is_empty() => Self::new(PathBuf::from(d)),
            _ => Self::new(fallback),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn key(bytes: &[u8], face_box: Option<FaceBox>, cfg: &PreprocessConfig) -> String {
        let mut h = Sha256::new();
        h.update(bytes);
        h.update(face_box.map(|b| b.to_string()).unwrap_or_default().as_bytes());
        h.update(serde_json::to_vec(cfg).expect("config serializes"));
        hex::encode(h.finalize())
    }

    pub fn get_or_compute(
        &self,
        image_path: &Path,
        face_box: Option<FaceBox>,
        cfg: &PreprocessConfig,
    ) -> Result<ImageTensor> {
        let bytes = fs::read(image_path).map_err(|e| Error::io(image_path, e))?;
        let key = Self::key(&bytes, face_box, cfg);
        let entry = self.dir.join(&key[..2]).join(format!("{key}.f32"));
        let side = cfg.output_size;
        if let Ok(raw) = fs::read(&entry) {
            if raw.len() == side * side * 4 {
                let data = raw
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                return ImageTensor::new(side, side, 1, data);
            }
        }
        let image = ImageTensor::load(image_path)?;
        let out = preprocess(&image, face_box, cfg)?;
        let raw: Vec<u8> = out.data().iter().flat_map(|v| v.to_le_bytes()).collect();
        crate::archive::write_atomic(&entry, &raw)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cached_result_equals_direct_preprocessing() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("a.png");
        let data: Vec<f32> = (0..100 * 80 * 3).map(|i| (i % 255) as f32 / 255.0).collect();
        ImageTensor::new(100, 80, 3, data).unwrap().save_png(&img_path).unwrap();
        let cache = PreprocessCache::new(dir.path().join("cache")).unwrap();
        let cfg = PreprocessConfig::default();
        let first = cache.get_or_compute(&img_path, None, &cfg).unwrap();
        let second = cache.get_or_compute(&img_path, None, &cfg).unwrap();
        let direct = preprocess(&ImageTensor::load(&img_path).unwrap(), None, &cfg).unwrap();
        assert_eq!(first, direct);
        assert_eq!(second, direct);
        let entries = walk(cache.dir());
        assert_eq!(entries, 1);
    }

    fn walk(d: &Path) -> usize {
        fs::read_dir(d)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                if p.is_dir() {
                    walk(&p)
                } else {
                    1
                }
            })
            .sum()
    }
}
