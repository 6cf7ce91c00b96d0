use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FaceDataset, Provenance};
use crate::error::{Error, Result};

/// Size of one split part: an identity count or a fraction of identities.
/// In config files an integer reads as a count and a float as a fraction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitAmount {
    Count(usize),
    Fraction(f64),
}

impl SplitAmount {
    /// Fractions round half-up to whole identities.
    fn resolve(self, n: usize) -> Result<usize> {
        match self {
            SplitAmount::Count(c) => Ok(c),
            SplitAmount::Fraction(f) if (0.0..=1.0).contains(&f) => Ok((f * n as f64 + 0.5).floor() as usize),
            SplitAmount::Fraction(f) => Err(Error::InfeasibleSplit(format!("fraction {f} outside [0, 1]"))),
        }
    }

    fn scaled(self, factor: usize) -> Self {
        match self {
            SplitAmount::Count(c) => SplitAmount::Count(c * factor),
            f => f,
        }
    }
}

/// Identity-level split. `train = None` means "every identity not assigned
/// to validation or test". The default holds out 10 validation and 25 test
/// identities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train: Option<SplitAmount>,
    pub val: SplitAmount,
    pub test: SplitAmount,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: None,
            val: SplitAmount::Count(10),
            test: SplitAmount::Count(25),
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn counts(train: usize, val: usize, test: usize, seed: u64) -> Self {
        SplitSpec {
            train: Some(SplitAmount::Count(train)),
            val: SplitAmount::Count(val),
            test: SplitAmount::Count(test),
            seed,
        }
    }

    /// Everything in train.
    pub fn all_train() -> Self {
        SplitSpec {
            train: None,
            val: SplitAmount::Count(0),
            test: SplitAmount::Count(0),
            seed: 0,
        }
    }

    /// Multiplies every count by `factor`; fractions are unchanged.
    pub fn scaled(&self, factor: usize) -> Self {
        SplitSpec {
            train: self.train.map(|t| t.scaled(factor)),
            val: self.val.scaled(factor),
            test: self.test.scaled(factor),
            seed: self.seed,
        }
    }

    /// Resolves to `(train, val, test)` identity counts for `n` identities.
    pub fn resolve(&self, n: usize) -> Result<(usize, usize, usize)> {
        let val = self.val.resolve(n)?;
        let test = self.test.resolve(n)?;
        if val + test > n {
            return Err(Error::InfeasibleSplit(format!(
                "val {val} + test {test} exceeds {n} identities"
            )));
        }
        let train = match self.train {
            None => n - val - test,
            Some(SplitAmount::Fraction(_)) => n - val - test,
            Some(SplitAmount::Count(c)) => {
                if c + val + test != n {
                    return Err(Error::InfeasibleSplit(format!(
                        "train {c} + val {val} + test {test} != {n} identities"
                    )));
                }
                c
            }
        };
        Ok((train, val, test))
    }

    pub fn validate(&self) -> Result<()> {
        for a in [Some(self.val), Some(self.test), self.train].into_iter().flatten() {
            if let SplitAmount::Fraction(f) = a {
                if !(0.0..=1.0).contains(&f) {
                    return Err(Error::InvalidConfig(format!("split fraction {f} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }
}

/// Partitions identities into train/val/test. Identities are sorted by id,
/// shuffled with `spec.seed`, then cut test-first, val next, train last, so
/// the result depends only on the identity set and the seed.
pub fn split_by_identity(dataset: &FaceDataset, spec: &SplitSpec) -> Result<(FaceDataset, FaceDataset, FaceDataset)> {
    let n = dataset.identity_count();
    let (_, val, test) = spec.resolve(n)?;
    let mut ids: Vec<&str> = dataset.identities().iter().map(String::as_str).collect();
    ids.sort_unstable();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test_ids: BTreeSet<&str> = ids[..test].iter().copied().collect();
    let val_ids: BTreeSet<&str> = ids[test..test + val].iter().copied().collect();
    let train_ids: BTreeSet<&str> = ids[test + val..].iter().copied().collect();
    Ok((dataset.subset(&train_ids), dataset.subset(&val_ids), dataset.subset(&test_ids)))
}

/// Splits real and generated identities separately (generated counts scaled
/// by `generated_units`) and concatenates the parts, so every split keeps the
/// real:generated ratio of the input.
pub fn split_stratified(
    dataset: &FaceDataset,
    spec: &SplitSpec,
    generated_units: usize,
) -> Result<(FaceDataset, FaceDataset, FaceDataset)> {
    let real = dataset.filter(|r| r.provenance == Provenance::Real);
    let generated = dataset.filter(|r| r.provenance == Provenance::Generated);
    let (rt, rv, rs) = split_by_identity(&real, spec)?;
    if generated.is_empty() {
        return Ok((rt, rv, rs));
    }
    let gspec = SplitSpec {
        seed: spec.seed.wrapping_add(1),
        ..spec.scaled(generated_units.max(1))
    };
    let (gt, gv, gs) = split_by_identity(&generated, &gspec)?;
    Ok((rt.concat(&gt)?, rv.concat(&gv)?, rs.concat(&gs)?))
}
