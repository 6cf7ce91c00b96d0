//! Single-file checkpoint archive.
//!
//! Layout:
//!
//! ```text
//! magic    8 bytes   b"FERAUGCK"
//! version  u32 LE    1
//! meta_len u64 LE
//! meta     meta_len bytes of UTF-8 JSON (ArchiveMetadata)
//! blobs    raw little-endian f32 weights, one blob per tensor entry
//! ```
//!
//! Tensor entries are named `{group}/{tensor}`; `offset` is the byte offset
//! of the blob relative to the start of the blob section.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::Params;

const MAGIC: &[u8; 8] = b"FERAUGCK";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub len: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMetadata {
    pub kind: String,
    pub config_digest: String,
    pub step: u64,
    pub tensors: Vec<TensorEntry>,
    /// Free-form document, e.g. the full config used to build the networks.
    pub extra: serde_json::Value,
}

/// Hex SHA-256 of the canonical JSON encoding of `value`.
pub fn digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Writes `groups` atomically (temp file then rename).
pub fn write(
    path: &Path,
    kind: &str,
    config_digest: &str,
    step: u64,
    extra: serde_json::Value,
    groups: &[(&str, &Params)],
) -> Result<()> {
    let mut tensors = Vec::new();
    let mut blob = Vec::new();
    for (group, params) in groups {
        for t in &params.tensors {
            tensors.push(TensorEntry {
                name: format!("{group}/{}", t.name),
                shape: t.shape.clone(),
                offset: blob.len() as u64,
                len: t.data.len() as u64,
            });
            for v in &t.data {
                blob.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    let meta = ArchiveMetadata {
        kind: kind.to_string(),
        config_digest: config_digest.to_string(),
        step,
        tensors,
        extra,
    };
    let meta_bytes = serde_json::to_vec_pretty(&meta)?;
    let mut out = Vec::with_capacity(20 + meta_bytes.len() + blob.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(meta_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta_bytes);
    out.extend_from_slice(&blob);
    write_atomic(path, &out)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or(""),
        std::process::id()
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// A decoded archive: metadata plus one [`Params`] per group, in file order.
#[derive(Clone, Debug)]
pub struct Archive {
    pub meta: ArchiveMetadata,
    pub groups: Vec<(String, Params)>,
}

impl Archive {
    pub fn group(&self, name: &str) -> Option<&Params> {
        self.groups.iter().find(|(g, _)| g == name).map(|(_, p)| p)
    }
}

pub fn read_metadata(bytes: &[u8]) -> Result<(ArchiveMetadata, usize)> {
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("not a feraug checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let meta_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let end = 20usize
        .checked_add(meta_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Checkpoint("truncated metadata".into()))?;
    Ok((serde_json::from_slice(&bytes[20..end])?, end))
}

pub fn read(path: &Path) -> Result<Archive> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (meta, start) = read_metadata(&bytes)?;
    let blob = &bytes[start..];
    let mut groups: Vec<(String, Params)> = Vec::new();
    for entry in &meta.tensors {
        let (group, name) = entry
            .name
            .split_once('/')
            .ok_or_else(|| Error::Checkpoint(format!("tensor {:?} has no group", entry.name)))?;
        if entry.shape.iter().product::<usize>() as u64 != entry.len {
            return Err(Error::Checkpoint(format!("tensor {:?}: shape/len mismatch", entry.name)));
        }
        let lo = entry.offset as usize;
        let hi = lo + 4 * entry.len as usize;
        if hi > blob.len() {
            return Err(Error::Checkpoint(format!("tensor {:?} runs past end of file", entry.name)));
        }
        let data = blob[lo..hi]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let idx = match groups.iter().position(|(g, _)| g == group) {
            Some(i) => i,
            None => {
                groups.push((group.to_string(), Params::default()));
                groups.len() - 1
            }
        };
        groups[idx].1.push(name, entry.shape.clone(), data);
    }
    Ok(Archive { meta, groups })
}

/// Rounds every parameter to f32, i.e. what a write/read round trip yields.
pub fn round_to_f32(params: &Params) -> Params {
    let mut p = params.clone();
    for t in &mut p.tensors {
        t.data.iter_mut().for_each(|v| *v = *v as f32 as f64);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_names_shapes_and_f32_values() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Params::default();
        a.push("conv1.weight", vec![2, 3], vec![0.1, -0.2, 0.3, 1e-9, 5.0, -7.25]);
        a.push("conv1.bias", vec![2], vec![0.0, 1.0]);
        let mut b = Params::default();
        b.push("head.weight", vec![1], vec![std::f64::consts::PI]);
        let path = dir.path().join("x.ckpt");
        write(&path, "test", "abc", 7, serde_json::json!({"k": 1}), &[("g", &a), ("d", &b)]).unwrap();
        let back = read(&path).unwrap();
        assert_eq!(back.meta.step, 7);
        assert_eq!(back.meta.config_digest, "abc");
        assert_eq!(back.meta.extra["k"], 1);
        assert_eq!(back.group("g").unwrap(), &round_to_f32(&a));
        assert_eq!(back.group("d").unwrap(), &round_to_f32(&b));
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        fs::write(&path, b"not a checkpoint at all").unwrap();
        assert!(matches!(read(&path), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn digest_is_stable_for_equal_values() {
        assert_eq!(digest(&(1, "a")), digest(&(1, "a")));
        assert_ne!(digest(&(1, "a")), digest(&(2, "a")));
    }
}
