use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SweepRow;
use crate::error::{Error, Result};

/// Accuracy drop (absolute) that counts as forgetting.
pub const DEFAULT_FORGETTING_MARGIN: f64 = 0.02;

// Differences within this of the margin count as equal to it, so a drop of
// 0.60 - 0.58 is not "more than 0.02" because of rounding.
const MARGIN_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestK {
    pub k: usize,
    pub accuracy: f64,
}

/// Mean held-out accuracy per `k` over seeds. Rows without a `k` (the
/// synthetic baseline) are ignored; a `k` row without a score for `tag` is
/// an error.
pub fn mean_by_k(rows: &[SweepRow], tag: &str) -> Result<BTreeMap<usize, f64>> {
    let mut by_k: BTreeMap<usize, Vec<(u64, f64)>> = BTreeMap::new();
    for r in rows {
        let Some(k) = r.k() else { continue };
        let v = *r
            .cross_db_accuracy
            .get(tag)
            .ok_or_else(|| Error::MissingHeldout(format!("{tag} (row {})", r.model_tag)))?;
        by_k.entry(k).or_default().push((r.seed, v));
    }
    Ok(by_k
        .into_iter()
        .map(|(k, mut v)| {
            // Fixed summation order keeps the mean independent of row order.
            v.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            (k, v.iter().map(|x| x.1).sum::<f64>() / v.len() as f64)
        })
        .collect())
}

/// `k` with the highest held-out accuracy; ties go to the smaller `k`.
pub fn select_best_k(rows: &[SweepRow], heldout_tag: &str) -> Result<BestK> {
    let means = mean_by_k(rows, heldout_tag)?;
    let mut best: Option<BestK> = None;
    for (&k, &accuracy) in &means {
        if best.is_none_or(|b| accuracy > b.accuracy) {
            best = Some(BestK { k, accuracy });
        }
    }
    best.ok_or_else(|| Error::InvalidConfig("no sweep rows with a k value".into()))
}

/// Smallest `k` past the best one whose held-out accuracy is more than
/// `margin` below the peak. Rows lacking a score for the tag are skipped.
pub fn detect_forgetting_threshold(rows: &[SweepRow], heldout_tag: &str, margin: f64) -> Option<usize> {
    let scored: Vec<SweepRow> = rows
        .iter()
        .filter(|r| r.cross_db_accuracy.contains_key(heldout_tag))
        .cloned()
        .collect();
    let means = mean_by_k(&scored, heldout_tag).ok()?;
    let best = select_best_k(&scored, heldout_tag).ok()?;
    means
        .range(best.k + 1..)
        .find(|(_, &acc)| best.accuracy - acc > margin + MARGIN_SLACK)
        .map(|(&k, _)| k)
}
