use serde::{Deserialize, Serialize};

use crate::emotion::{EmotionLabel, NUM_EMOTIONS};
use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes, both in label order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_EMOTIONS]; NUM_EMOTIONS],
}

/// Counts `(truth, prediction)` pairs.
pub fn confusion(truth: &[usize], predicted: &[usize]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyDataset("label sequence".into()));
    }
    let mut m = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        for l in [t, p] {
            if l >= NUM_EMOTIONS {
                return Err(Error::LabelOutOfRange(l));
            }
        }
        m.counts[t][p] += 1;
    }
    Ok(m)
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_EMOTIONS).map(|i| self.counts[i][i]).sum()
    }

    /// trace / total, 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }

    pub fn row_sums(&self) -> [u64; NUM_EMOTIONS] {
        self.counts.map(|r| r.iter().sum())
    }

    pub fn col_sums(&self) -> [u64; NUM_EMOTIONS] {
        let mut s = [0; NUM_EMOTIONS];
        for row in &self.counts {
            for (j, v) in row.iter().enumerate() {
                s[j] += v;
            }
        }
        s
    }

    /// Each row divided by its sum; all-zero rows stay zero.
    pub fn row_normalized(&self) -> [[f64; NUM_EMOTIONS]; NUM_EMOTIONS] {
        let mut out = [[0.0; NUM_EMOTIONS]; NUM_EMOTIONS];
        for (i, row) in self.counts.iter().enumerate() {
            let s: u64 = row.iter().sum();
            if s > 0 {
                for j in 0..NUM_EMOTIONS {
                    out[i][j] = row[j] as f64 / s as f64;
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub emotion: EmotionLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True samples of this class.
    pub support: u64,
    /// Set when a denominator was zero and the metric was defined as 0.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

/// Precision, recall and F1 per class. A zero denominator yields 0 and sets
/// the matching `*_undefined` flag.
pub fn per_class_metrics(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    let rows = cm.row_sums();
    let cols = cm.col_sums();
    EmotionLabel::ALL
        .iter()
        .map(|&e| {
            let c = e.index();
            let tp = cm.counts[c][c] as f64;
            let (precision, pu) = if cols[c] == 0 { (0.0, true) } else { (tp / cols[c] as f64, false) };
            let (recall, ru) = if rows[c] == 0 { (0.0, true) } else { (tp / rows[c] as f64, false) };
            let (f1, fu) = if precision + recall > 0.0 {
                (2.0 * precision * recall / (precision + recall), false)
            } else {
                (0.0, true)
            };
            ClassMetrics {
                emotion: e,
                precision,
                recall,
                f1,
                support: rows[c],
                precision_undefined: pu,
                recall_undefined: ru,
                f1_undefined: fu,
            }
        })
        .collect()
}
