use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FaceBox, FaceDataset, LabeledFace, PreprocessCache, PreprocessConfig, Provenance};
use crate::emotion::EmotionLabel;
use crate::error::{Error, Result};
use crate::image::ImageTensor;

pub const MANIFEST_HEADER: &str = "path,identity_id,emotion,provenance,source_db";

/// One manifest row as written on disk. `face_box` is an optional sixth
/// column holding `"x y w h"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub path: String,
    pub identity_id: String,
    pub emotion: String,
    pub provenance: String,
    pub source_db: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_box: Option<String>,
}

/// A validated row: parsed fields plus the resolved image path.
#[derive(Clone, Debug)]
pub(crate) struct ParsedRow {
    pub record: ManifestRecord,
    pub emotion: EmotionLabel,
    pub provenance: Provenance,
    pub face_box: Option<FaceBox>,
    pub resolved: PathBuf,
}

fn manifest_dir(path: &Path) -> Result<PathBuf> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::canonicalize(dir).map_err(|e| Error::io(dir, e))
}

/// Lexically normalizes `.` and `..` components.
fn normalize(p: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in p.components() {
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

/// Forward-slash path of `to` relative to directory `from_dir`. Both should
/// be absolute.
pub fn relative_path(from_dir: &Path, to: &Path) -> String {
    let from: Vec<_> = normalize(from_dir).components().map(|c| c.as_os_str().to_owned()).collect();
    let to_c: Vec<_> = normalize(to).components().map(|c| c.as_os_str().to_owned()).collect();
    let common = from.iter().zip(&to_c).take_while(|(a, b)| a == b).count();
    let mut parts: Vec<String> = vec!["..".to_string(); from.len() - common];
    parts.extend(to_c[common..].iter().map(|c| c.to_string_lossy().into_owned()));
    parts.join("/")
}

/// Reads and validates every row without decoding images.
pub(crate) fn read_rows(path: &Path) -> Result<Vec<ParsedRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = manifest_dir(path)?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let row_err = |row: usize, message: String| Error::ManifestRow {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| row_err(0, e.to_string()))?.clone();
    for col in MANIFEST_HEADER.split(',') {
        if !headers.iter().any(|h| h == col) {
            return Err(row_err(0, format!("missing column {col:?} (header must be {MANIFEST_HEADER:?})")));
        }
    }
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize::<ManifestRecord>().enumerate() {
        let row = i + 1;
        let record = rec.map_err(|e| row_err(row, e.to_string()))?;
        let emotion: EmotionLabel = record
            .emotion
            .parse()
            .map_err(|e: Error| row_err(row, e.to_string()))?;
        let provenance: Provenance = record.provenance.parse().map_err(|e| row_err(row, e))?;
        if record.identity_id.is_empty() {
            return Err(row_err(row, "empty identity_id".into()));
        }
        if record.path.is_empty() {
            return Err(row_err(row, "empty path".into()));
        }
        let rel = Path::new(&record.path);
        if rel.is_absolute() {
            return Err(row_err(row, format!("path {:?} must be relative to the manifest", record.path)));
        }
        let face_box = match record.face_box.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(s) => Some(s.parse::<FaceBox>().map_err(|e| row_err(row, e))?),
        };
        let resolved = normalize(&root.join(rel));
        out.push(ParsedRow {
            record,
            emotion,
            provenance,
            face_box,
            resolved,
        });
    }
    Ok(out)
}

/// Parsed manifest rows (no image decoding).
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    Ok(read_rows(path)?.into_iter().map(|r| r.record).collect())
}

fn to_face(row: &ParsedRow, image: ImageTensor) -> LabeledFace {
    LabeledFace {
        image,
        emotion: row.emotion,
        identity_id: row.record.identity_id.clone(),
        provenance: row.provenance,
        source_db: row.record.source_db.clone(),
        source_path: Some(row.resolved.clone()),
        face_box: row.face_box,
    }
}

/// Loads a manifest and decodes every referenced image at its native size.
pub fn load_corpus(manifest_path: &Path) -> Result<FaceDataset> {
    let rows = read_rows(manifest_path)?;
    let mut records = Vec::with_capacity(rows.len());
    for row in &rows {
        let image = ImageTensor::load(&row.resolved)?;
        records.push(to_face(row, image));
    }
    FaceDataset::new(records)
}

/// Loads a manifest with every image preprocessed, going through `cache`
/// when given. Face boxes are consumed by preprocessing, so the returned
/// records carry `face_box = None`.
pub fn load_preprocessed(
    manifest_path: &Path,
    cfg: &PreprocessConfig,
    cache: Option<&PreprocessCache>,
) -> Result<FaceDataset> {
    let rows = read_rows(manifest_path)?;
    let mut records = Vec::with_capacity(rows.len());
    for row in &rows {
        let image = match cache {
            Some(c) => c.get_or_compute(&row.resolved, row.face_box, cfg)?,
            None => super::preprocess(&ImageTensor::load(&row.resolved)?, row.face_box, cfg)?,
        };
        let mut face = to_face(row, image);
        face.face_box = None;
        records.push(face);
    }
    FaceDataset::new(records)
}

/// Writes a manifest for records that are backed by files. Paths are made
/// relative to the manifest's directory.
pub fn write_manifest(path: &Path, dataset: &FaceDataset) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dir = fs::canonicalize(dir).map_err(|e| Error::io(dir, e))?;
    let with_box = dataset.records().iter().any(|r| r.face_box.is_some());
    let mut out = String::from(MANIFEST_HEADER);
    if with_box {
        out.push_str(",face_box");
    }
    out.push('\n');
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in dataset.records() {
        let src = r.source_path.as_ref().ok_or_else(|| {
            Error::InvalidConfig(format!(
                "record ({}, {}) has no backing file; save the dataset first",
                r.identity_id, r.emotion
            ))
        })?;
        let mut fields = vec![
            relative_path(&dir, src),
            r.identity_id.clone(),
            r.emotion.to_string(),
            r.provenance.to_string(),
            r.source_db.clone(),
        ];
        if with_box {
            fields.push(r.face_box.map(|b| b.to_string()).unwrap_or_default());
        }
        writer
            .write_record(&fields)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    let body = writer
        .into_inner()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    out.push_str(&String::from_utf8(body).expect("utf-8 csv"));
    crate::archive::write_atomic(path, out.as_bytes())
}

fn file_stem(identity: &str) -> String {
    identity
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Writes every image as `images/{identity}__{emotion}.png` under `dir`
/// and a `manifest.csv` next to them. Returns the dataset with
/// `source_path` pointing at the written files.
pub fn save_dataset(dir: &Path, dataset: &FaceDataset) -> Result<FaceDataset> {
    let images = dir.join("images");
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let images = fs::canonicalize(&images).map_err(|e| Error::io(&images, e))?;
    let mut records = Vec::with_capacity(dataset.len());
    for r in dataset.records() {
        let name = format!("{}__{}__{}.png", file_stem(&r.identity_id), r.emotion, r.provenance);
        let path = images.join(name);
        r.image.save_png(&path)?;
        records.push(LabeledFace {
            source_path: Some(path),
            ..r.clone()
        });
    }
    let saved = FaceDataset::new(records)?;
    write_manifest(&dir.join("manifest.csv"), &saved)?;
    Ok(saved)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_images(dir: &Path, n_ids: usize) -> String {
        let mut csv = format!("{MANIFEST_HEADER}\n");
        for i in 0..n_ids {
            for e in EmotionLabel::ALL {
                let rel = format!("img/s{i}_{e}.png");
                let p = dir.join(&rel);
                fs::create_dir_all(p.parent().unwrap()).unwrap();
                ImageTensor::filled(8, 8, 1, 0.25).save_png(&p).unwrap();
                csv.push_str(&format!("{rel},s{i},{e},real,toy\n"));
            }
        }
        csv
    }

    #[test]
    fn empty_manifest_gives_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.csv");
        fs::write(&m, format!("{MANIFEST_HEADER}\n")).unwrap();
        let ds = load_corpus(&m).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.identity_count(), 0);
        fs::write(&m, "").unwrap();
        assert!(load_corpus(&m).unwrap().is_empty());
    }

    #[test]
    fn two_identities_give_twelve_records() {
        let dir = tempfile::tempdir().unwrap();
        let csv = write_images(dir.path(), 2);
        let m = dir.path().join("m.csv");
        fs::write(&m, csv).unwrap();
        let ds = load_corpus(&m).unwrap();
        assert_eq!(ds.len(), 12);
        assert_eq!(ds.identity_count(), 2);
        for id in ds.identities() {
            assert_eq!(ds.records_of(id).len(), 6);
        }
    }

    #[test]
    fn neutral_row_is_rejected_with_its_row_number() {
        let dir = tempfile::tempdir().unwrap();
        let mut csv = write_images(dir.path(), 1);
        csv.push_str("img/s0_anger.png,s9,neutral,real,toy\n");
        let m = dir.path().join("m.csv");
        fs::write(&m, csv).unwrap();
        match load_corpus(&m) {
            Err(Error::ManifestRow { row, message, .. }) => {
                assert_eq!(row, 7);
                assert!(message.contains("neutral"), "{message}");
            }
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn missing_manifest_and_missing_image_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_corpus(&dir.path().join("nope.csv")), Err(Error::Io { .. })));
        let m = dir.path().join("m.csv");
        fs::write(&m, format!("{MANIFEST_HEADER}\nmissing.png,a,anger,real,x\n")).unwrap();
        assert!(matches!(load_corpus(&m), Err(Error::Image { .. })));
    }

    #[test]
    fn save_then_load_round_trips_labels() {
        let dir = tempfile::tempdir().unwrap();
        let faces: Vec<_> = EmotionLabel::ALL
            .iter()
            .map(|&e| {
                let mut f = LabeledFace::new(ImageTensor::filled(4, 4, 1, 0.5), e, "id/1", Provenance::Generated, "gen");
                f.face_box = Some(FaceBox::full(4, 4));
                f
            })
            .collect();
        let ds = FaceDataset::new(faces).unwrap();
        save_dataset(dir.path(), &ds).unwrap();
        let back = load_corpus(&dir.path().join("manifest.csv")).unwrap();
        assert_eq!(back.len(), 6);
        assert!(back.records().iter().all(|r| r.identity_id == "id/1"
            && r.provenance == Provenance::Generated
            && r.face_box == Some(FaceBox::full(4, 4))));
    }

    #[test]
    fn relative_paths_walk_up_when_needed() {
        assert_eq!(relative_path(Path::new("/a/b"), Path::new("/a/b/c/x.png")), "c/x.png");
        assert_eq!(relative_path(Path::new("/a/b/out"), Path::new("/a/data/x.png")), "../../data/x.png");
    }
}
