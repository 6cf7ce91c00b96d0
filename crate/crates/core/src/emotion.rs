use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_EMOTIONS: usize = 6;

/// The six basic emotion classes. The integer encoding (`index`) is stable
/// and defines row/column order everywhere a per-class array appears:
/// anger=0, disgust=1, fear=2, happiness=3, sadness=4, surprised=5.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Anger,
    Disgust,
    Fear,
    Happiness,
    Sadness,
    Surprised,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; NUM_EMOTIONS] = [
        EmotionLabel::Anger,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Happiness,
        EmotionLabel::Sadness,
        EmotionLabel::Surprised,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or(Error::LabelOutOfRange(i))
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Anger => "anger",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Happiness => "happiness",
            EmotionLabel::Sadness => "sadness",
            EmotionLabel::Surprised => "surprised",
        }
    }

    pub fn one_hot(self) -> DomainCode {
        DomainCode::from(self)
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    /// Case-insensitive; "surprise" is accepted as an alias of "surprised".
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "anger" | "angry" => Ok(EmotionLabel::Anger),
            "disgust" | "disgusted" => Ok(EmotionLabel::Disgust),
            "fear" | "afraid" => Ok(EmotionLabel::Fear),
            "happiness" | "happy" => Ok(EmotionLabel::Happiness),
            "sadness" | "sad" => Ok(EmotionLabel::Sadness),
            "surprised" | "surprise" => Ok(EmotionLabel::Surprised),
            _ => Err(Error::UnknownEmotion(s.to_string())),
        }
    }
}

/// Target-domain conditioning vector: a one-hot encoding of an emotion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainCode {
    one_hot: [f64; NUM_EMOTIONS],
}

impl DomainCode {
    /// Validates that exactly one entry is 1 and the rest are 0.
    pub fn new(values: [f64; NUM_EMOTIONS]) -> Result<Self> {
        let ones = values.iter().filter(|&&v| v == 1.0).count();
        let zeros = values.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || zeros != NUM_EMOTIONS - 1 {
            return Err(Error::MalformedOneHot(values.to_vec()));
        }
        Ok(DomainCode { one_hot: values })
    }

    /// Accepts an arbitrary-length slice so malformed lengths are reported
    /// rather than rejected by the type system.
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; NUM_EMOTIONS] = values
            .try_into()
            .map_err(|_| Error::MalformedOneHot(values.to_vec()))?;
        Self::new(arr)
    }

    pub fn values(&self) -> &[f64; NUM_EMOTIONS] {
        &self.one_hot
    }

    pub fn emotion(&self) -> EmotionLabel {
        let i = self.one_hot.iter().position(|&v| v == 1.0).expect("validated one-hot");
        EmotionLabel::ALL[i]
    }
}

impl From<EmotionLabel> for DomainCode {
    fn from(e: EmotionLabel) -> Self {
        let mut one_hot = [0.0; NUM_EMOTIONS];
        one_hot[e.index()] = 1.0;
        DomainCode { one_hot }
    }
}
