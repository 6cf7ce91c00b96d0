use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::FaceDataset;
use crate::emotion::{EmotionLabel, NUM_EMOTIONS};
use crate::error::{Error, Result};

/// `RFEs + k × GFEs`: the real set plus `k` units of generated identities,
/// one unit being as many identities as `real` has. Generated identities are
/// taken without replacement in pool order, so mixes for increasing `k` are
/// nested prefixes of the pool.
pub fn mix(real: &FaceDataset, k: usize, pool: &FaceDataset) -> Result<FaceDataset> {
    if k == 0 {
        return Ok(real.clone());
    }
    let needed = k * real.identity_count();
    if pool.identity_count() < needed {
        return Err(Error::PoolExhausted {
            needed,
            available: pool.identity_count(),
        });
    }
    let drawn: BTreeSet<&str> = pool.identities()[..needed].iter().map(String::as_str).collect();
    if let Some(clash) = drawn.iter().find(|id| !real.records_of(id).is_empty()) {
        return Err(Error::InvalidConfig(format!(
            "generated identity {clash:?} also appears in the real set"
        )));
    }
    real.concat(&pool.subset(&drawn))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub balanced: bool,
    pub per_class_counts: [usize; NUM_EMOTIONS],
    /// Identities without exactly one record per class, sorted.
    pub offending_identities: Vec<String>,
}

/// Balanced means every identity has exactly one record of each class.
pub fn validate_balance(dataset: &FaceDataset) -> BalanceReport {
    let mut per_identity: BTreeMap<&str, [usize; NUM_EMOTIONS]> = BTreeMap::new();
    for r in dataset.records() {
        per_identity.entry(&r.identity_id).or_default()[r.emotion.index()] += 1;
    }
    let offending_identities: Vec<String> = per_identity
        .iter()
        .filter(|(_, counts)| counts.iter().any(|&c| c != 1))
        .map(|(id, _)| id.to_string())
        .collect();
    BalanceReport {
        balanced: offending_identities.is_empty(),
        per_class_counts: dataset.per_class_counts(),
        offending_identities,
    }
}

/// Per-class counts a balanced `real` set mixed with `k` units must have.
pub fn expected_mixed_counts(real: &FaceDataset, k: usize) -> [usize; NUM_EMOTIONS] {
    let mut counts = real.per_class_counts();
    let add = k * real.identity_count();
    for e in EmotionLabel::ALL {
        counts[e.index()] += add;
    }
    counts
}
