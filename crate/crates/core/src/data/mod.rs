//! Corpus ingestion, preprocessing, identity-disjoint splitting, balanced
//! assembly of generated data and real/synthetic mixing.

mod assemble;
mod cache;
mod manifest;
mod mix;
mod preprocess;
mod split;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use assemble::{assemble_generated, generated_identity_id};
pub use cache::PreprocessCache;
pub use manifest::{
    load_corpus, load_preprocessed, read_manifest, relative_path, save_dataset, write_manifest,
    ManifestRecord, MANIFEST_HEADER,
};
pub use mix::{expected_mixed_counts, mix, validate_balance, BalanceReport};
pub use preprocess::{bilinear_resize, preprocess, to_grayscale, FaceBox, PreprocessConfig};
pub use split::{split_by_identity, split_stratified, SplitAmount, SplitSpec};

use crate::emotion::{EmotionLabel, NUM_EMOTIONS};
use crate::error::{Error, Result};
use crate::image::ImageTensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Generated,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Real => "real",
            Provenance::Generated => "generated",
        })
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "real" => Ok(Provenance::Real),
            "generated" | "synthetic" => Ok(Provenance::Generated),
            other => Err(format!("unknown provenance {other:?}")),
        }
    }
}

/// One face image with its label and bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledFace {
    pub image: ImageTensor,
    pub emotion: EmotionLabel,
    pub identity_id: String,
    pub provenance: Provenance,
    pub source_db: String,
    /// Absolute location of the backing image file, if any.
    pub source_path: Option<PathBuf>,
    pub face_box: Option<FaceBox>,
}

impl LabeledFace {
    pub fn new(
        image: ImageTensor,
        emotion: EmotionLabel,
        identity_id: impl Into<String>,
        provenance: Provenance,
        source_db: impl Into<String>,
    ) -> Self {
        LabeledFace {
            image,
            emotion,
            identity_id: identity_id.into(),
            provenance,
            source_db: source_db.into(),
            source_path: None,
            face_box: None,
        }
    }

    fn key(&self) -> (&str, EmotionLabel, Provenance, &str) {
        (&self.identity_id, self.emotion, self.provenance, &self.source_db)
    }
}

/// Identity-indexed collection of faces.
///
/// Invariants: every identity id is nonempty, every image finite, the index
/// covers exactly the records, and no `(identity, emotion, provenance,
/// source_db)` tuple occurs twice. Identities keep first-appearance order,
/// which is the "pool order" used when drawing generated identities.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FaceDataset {
    records: Vec<LabeledFace>,
    identity_order: Vec<String>,
    identity_index: HashMap<String, Vec<usize>>,
}

impl FaceDataset {
    pub fn new(records: Vec<LabeledFace>) -> Result<Self> {
        let mut ds = FaceDataset::default();
        ds.extend(records)?;
        Ok(ds)
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = LabeledFace>) -> Result<()> {
        let mut seen: HashSet<(String, EmotionLabel, Provenance, String)> = self
            .records
            .iter()
            .map(|r| {
                let (a, b, c, d) = r.key();
                (a.to_string(), b, c, d.to_string())
            })
            .collect();
        for r in records {
            if r.identity_id.is_empty() {
                return Err(Error::InvalidConfig("record with empty identity_id".into()));
            }
            if !r.image.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "non-finite image for identity {}",
                    r.identity_id
                )));
            }
            let (a, b, c, d) = r.key();
            if !seen.insert((a.to_string(), b, c, d.to_string())) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate record ({}, {}, {}, {})",
                    a, b, c, d
                )));
            }
            let idx = self.records.len();
            match self.identity_index.get_mut(&r.identity_id) {
                Some(v) => v.push(idx),
                None => {
                    self.identity_order.push(r.identity_id.clone());
                    self.identity_index.insert(r.identity_id.clone(), vec![idx]);
                }
            }
            self.records.push(r);
        }
        Ok(())
    }

    pub fn records(&self) -> &[LabeledFace] {
        &self.records
    }

    pub fn into_records(self) -> Vec<LabeledFace> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Identity ids in first-appearance order.
    pub fn identities(&self) -> &[String] {
        &self.identity_order
    }

    pub fn identity_count(&self) -> usize {
        self.identity_order.len()
    }

    pub fn records_of(&self, identity: &str) -> &[usize] {
        self.identity_index
            .get(identity)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Sub-dataset with the given identities' records, original record order.
    pub fn subset(&self, identities: &BTreeSet<&str>) -> FaceDataset {
        let records = self
            .records
            .iter()
            .filter(|r| identities.contains(r.identity_id.as_str()))
            .cloned()
            .collect();
        FaceDataset::new(records).expect("subset of a valid dataset is valid")
    }

    pub fn filter(&self, keep: impl Fn(&LabeledFace) -> bool) -> FaceDataset {
        let records = self.records.iter().filter(|r| keep(r)).cloned().collect();
        FaceDataset::new(records).expect("subset of a valid dataset is valid")
    }

    pub fn per_class_counts(&self) -> [usize; NUM_EMOTIONS] {
        let mut counts = [0; NUM_EMOTIONS];
        for r in &self.records {
            counts[r.emotion.index()] += 1;
        }
        counts
    }

    pub fn classes_present(&self) -> usize {
        self.per_class_counts().iter().filter(|&&c| c > 0).count()
    }

    pub fn map_images(&self, f: impl Fn(&LabeledFace) -> Result<ImageTensor>) -> Result<FaceDataset> {
        let records = self
            .records
            .iter()
            .map(|r| {
                Ok(LabeledFace {
                    image: f(r)?,
                    ..r.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        FaceDataset::new(records)
    }

    /// Applies [`preprocess`] to every image.
    pub fn preprocessed(&self, cfg: &PreprocessConfig) -> Result<FaceDataset> {
        self.map_images(|r| preprocess(&r.image, r.face_box, cfg))
    }

    /// Concatenates two datasets (records of `self` first).
    pub fn concat(&self, other: &FaceDataset) -> Result<FaceDataset> {
        let mut out = self.clone();
        out.extend(other.records.iter().cloned())?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn face(id: &str, e: EmotionLabel) -> LabeledFace {
        LabeledFace::new(ImageTensor::filled(2, 2, 1, 0.5), e, id, Provenance::Real, "db")
    }

    #[test]
    fn index_covers_records_in_first_appearance_order() {
        let ds = FaceDataset::new(vec![
            face("b", EmotionLabel::Anger),
            face("a", EmotionLabel::Anger),
            face("b", EmotionLabel::Fear),
        ])
        .unwrap();
        assert_eq!(ds.identities(), ["b", "a"]);
        assert_eq!(ds.records_of("b"), [0, 2]);
        assert_eq!(ds.records_of("a"), [1]);
        let covered: usize = ds.identities().iter().map(|i| ds.records_of(i).len()).sum();
        assert_eq!(covered, ds.len());
    }

    #[test]
    fn rejects_duplicates_and_empty_ids() {
        assert!(FaceDataset::new(vec![face("a", EmotionLabel::Anger), face("a", EmotionLabel::Anger)]).is_err());
        assert!(FaceDataset::new(vec![face("", EmotionLabel::Anger)]).is_err());
        let mut other_db = face("a", EmotionLabel::Anger);
        other_db.source_db = "other".into();
        assert!(FaceDataset::new(vec![face("a", EmotionLabel::Anger), other_db]).is_ok());
    }
}
