//! Metrics, evaluation reports and the cross-database harness.

mod metrics;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use metrics::{confusion, per_class_metrics, ClassMetrics, ConfusionMatrix};

use crate::data::{read_manifest, FaceDataset};
use crate::emotion::{EmotionLabel, NUM_EMOTIONS};
use crate::error::{Error, Result};
use crate::model::Classifier;
use crate::plots;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_tag: String,
    pub dataset_tag: String,
    pub cross_database: bool,
    pub samples: u64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub confusion_normalized: [[f64; NUM_EMOTIONS]; NUM_EMOTIONS],
    pub per_class: Vec<ClassMetrics>,
    pub macro_f1: f64,
    /// Human-readable notes, e.g. classes whose metrics were undefined.
    pub flags: Vec<String>,
}

impl EvaluationReport {
    pub fn from_labels(truth: &[usize], predicted: &[usize], model_tag: &str, dataset_tag: &str) -> Result<Self> {
        let cm = confusion(truth, predicted)?;
        let per_class = per_class_metrics(&cm);
        let mut flags = Vec::new();
        for m in &per_class {
            let mut undefined = Vec::new();
            if m.precision_undefined {
                undefined.push("precision");
            }
            if m.recall_undefined {
                undefined.push("recall");
            }
            if m.f1_undefined {
                undefined.push("f1");
            }
            if !undefined.is_empty() {
                flags.push(format!("{}: {} undefined, reported as 0", m.emotion, undefined.join("/")));
            }
        }
        Ok(EvaluationReport {
            model_tag: model_tag.to_string(),
            dataset_tag: dataset_tag.to_string(),
            cross_database: false,
            samples: cm.total(),
            accuracy: cm.accuracy(),
            confusion_normalized: cm.row_normalized(),
            macro_f1: per_class.iter().map(|m| m.f1).sum::<f64>() / NUM_EMOTIONS as f64,
            confusion: cm,
            per_class,
            flags,
        })
    }

    /// `{model_tag}__{dataset_tag}`
    pub fn file_stem(&self) -> String {
        format!("{}__{}", self.model_tag, self.dataset_tag)
    }

    pub fn confusion_svg(&self, normalized: bool) -> String {
        let labels: Vec<&str> = EmotionLabel::ALL.iter().map(|e| e.name()).collect();
        let shade: Vec<Vec<f64>> = self.confusion_normalized.iter().map(|r| r.to_vec()).collect();
        let text: Vec<Vec<String>> = (0..NUM_EMOTIONS)
            .map(|i| {
                (0..NUM_EMOTIONS)
                    .map(|j| {
                        if normalized {
                            format!("{:.2}", self.confusion_normalized[i][j])
                        } else {
                            self.confusion.counts[i][j].to_string()
                        }
                    })
                    .collect()
            })
            .collect();
        let kind = if normalized { "row-normalized" } else { "counts" };
        plots::heatmap(
            &format!("{} on {} ({kind}, acc {:.3})", self.model_tag, self.dataset_tag, self.accuracy),
            &labels,
            &shade,
            &text,
            "true",
            "predicted",
        )
    }

    pub fn metrics_svg(&self) -> String {
        let labels: Vec<&str> = EmotionLabel::ALL.iter().map(|e| e.name()).collect();
        let get = |f: fn(&ClassMetrics) -> f64| self.per_class.iter().map(f).collect::<Vec<_>>();
        plots::grouped_bars(
            &format!("{} on {}: precision / recall / F1", self.model_tag, self.dataset_tag),
            &labels,
            &[
                ("precision", get(|m| m.precision)),
                ("recall", get(|m| m.recall)),
                ("f1", get(|m| m.f1)),
            ],
        )
    }

    /// Writes `{stem}.json`, `{stem}.confusion.svg`,
    /// `{stem}.confusion_normalized.svg` and `{stem}.metrics.svg` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let stem = self.file_stem();
        let files = [
            (format!("{stem}.json"), serde_json::to_string_pretty(self)? + "\n"),
            (format!("{stem}.confusion.svg"), self.confusion_svg(false)),
            (format!("{stem}.confusion_normalized.svg"), self.confusion_svg(true)),
            (format!("{stem}.metrics.svg"), self.metrics_svg()),
        ];
        let mut out = Vec::new();
        for (name, body) in files {
            let p = dir.join(name);
            crate::archive::write_atomic(&p, body.as_bytes())?;
            out.push(p);
        }
        Ok(out)
    }
}

/// Scores `model` on `dataset`.
pub fn evaluate(model: &Classifier, dataset: &FaceDataset, model_tag: &str, dataset_tag: &str) -> Result<EvaluationReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset(format!("evaluation set {dataset_tag:?}")));
    }
    let predicted = model.predict_dataset(dataset)?;
    let truth: Vec<usize> = dataset.records().iter().map(|r| r.emotion.index()).collect();
    EvaluationReport::from_labels(&truth, &predicted, model_tag, dataset_tag)
}

/// Identities and image files a model was trained on.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingReference {
    pub identities: BTreeSet<String>,
    pub paths: BTreeSet<PathBuf>,
}

fn normalize(p: &Path) -> PathBuf {
    p.canonicalize().unwrap_or_else(|_| p.to_path_buf())
}

impl TrainingReference {
    pub fn from_dataset(ds: &FaceDataset) -> Self {
        TrainingReference {
            identities: ds.identities().iter().cloned().collect(),
            paths: ds
                .records()
                .iter()
                .filter_map(|r| r.source_path.as_deref().map(normalize))
                .collect(),
        }
    }

    /// Reads a manifest without decoding images.
    pub fn from_manifest(path: &Path) -> Result<Self> {
        let root = path.parent().unwrap_or(Path::new("."));
        let mut r = TrainingReference::default();
        for rec in read_manifest(path)? {
            r.identities.insert(rec.identity_id.clone());
            r.paths.insert(normalize(&root.join(&rec.path)));
        }
        Ok(r)
    }
}

/// Evaluates on a held-out corpus after verifying it shares no identity and
/// no image file with any training reference.
pub fn cross_database_evaluate(
    model: &Classifier,
    heldout: &FaceDataset,
    training: &[TrainingReference],
    model_tag: &str,
    dataset_tag: &str,
) -> Result<EvaluationReport> {
    if heldout.is_empty() {
        return Err(Error::EmptyDataset(format!("held-out set {dataset_tag:?}")));
    }
    let mut identities = BTreeSet::new();
    let mut paths = BTreeSet::new();
    for reference in training {
        for id in heldout.identities() {
            if reference.identities.contains(id) {
                identities.insert(id.clone());
            }
        }
        for r in heldout.records() {
            if let Some(p) = r.source_path.as_deref() {
                let p = normalize(p);
                if reference.paths.contains(&p) {
                    paths.insert(p.display().to_string());
                }
            }
        }
    }
    if !identities.is_empty() || !paths.is_empty() {
        return Err(Error::Overlap {
            identities: identities.into_iter().collect(),
            paths: paths.into_iter().collect(),
        });
    }
    let mut report = evaluate(model, heldout, model_tag, dataset_tag)?;
    report.cross_database = true;
    Ok(report)
}
