//! Parametric cartoon faces: an oval, two eyes, two brows and a mouth whose
//! geometry is set per emotion. Used as a fully deterministic identity
//! source and to build toy corpora with known labels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use std::path::{Path, PathBuf};

use crate::data::{save_dataset, FaceDataset, LabeledFace, Provenance};
use crate::emotion::EmotionLabel;
use crate::error::Result;
use crate::image::ImageTensor;

/// Per-corpus rendering style. Two corpora with different styles play the
/// role of two different databases in cross-database tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceStyle {
    pub background: f64,
    pub skin: f64,
    pub feature: f64,
    /// Std of i.i.d. pixel noise.
    pub noise: f64,
    /// Scales the expression geometry; 1.0 is canonical.
    pub expressiveness: f64,
    /// RGB tint applied when rendering three channels.
    pub tint: [f64; 3],
}

impl FaceStyle {
    pub fn studio() -> Self {
        FaceStyle {
            background: 0.15,
            skin: 0.72,
            feature: 0.12,
            noise: 0.02,
            expressiveness: 1.0,
            tint: [1.0, 0.9, 0.8],
        }
    }

    /// A visibly different acquisition setting: brighter background, lower
    /// contrast, more sensor noise, subtler expressions.
    pub fn field() -> Self {
        FaceStyle {
            background: 0.45,
            skin: 0.8,
            feature: 0.25,
            noise: 0.05,
            expressiveness: 0.8,
            tint: [0.95, 0.95, 1.0],
        }
    }
}

impl Default for FaceStyle {
    fn default() -> Self {
        Self::studio()
    }
}

/// Identity-specific face geometry in normalized [0,1] image coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityTraits {
    pub center: (f64, f64),
    pub face_radii: (f64, f64),
    pub skin_offset: f64,
    pub eye_spacing: f64,
    pub eye_height: f64,
    pub eye_radius: f64,
    pub brow_gap: f64,
    pub brow_length: f64,
    pub mouth_height: f64,
    pub mouth_width: f64,
    pub light_gradient: f64,
    pub expression_gain: f64,
}

/// Number of latent coordinates that drive [`IdentityTraits`].
pub const TRAIT_DIMS: usize = 12;

fn squash(z: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) / (1.0 + (-1.7 * z).exp())
}

impl IdentityTraits {
    /// Maps a latent vector to traits. Missing coordinates read as 0 (the
    /// mid-range value); extra coordinates are ignored.
    pub fn from_latent(latent: &[f64]) -> Self {
        let z = |i: usize| latent.get(i).copied().unwrap_or(0.0);
        IdentityTraits {
            center: (squash(z(0), 0.46, 0.54), squash(z(1), 0.47, 0.53)),
            face_radii: (squash(z(2), 0.30, 0.38), squash(z(3), 0.38, 0.45)),
            skin_offset: squash(z(4), -0.12, 0.12),
            eye_spacing: squash(z(5), 0.11, 0.16),
            eye_height: squash(z(6), -0.11, -0.06),
            eye_radius: squash(z(7), 0.035, 0.05),
            brow_gap: squash(z(8), 0.065, 0.09),
            brow_length: squash(z(9), 0.09, 0.13),
            mouth_height: squash(z(10), 0.17, 0.22),
            mouth_width: squash(z(11), 0.12, 0.17),
            light_gradient: squash(z(4) * 0.7 - z(5) * 0.7, -0.08, 0.08),
            expression_gain: squash(z(8) * 0.5 + z(11) * 0.5, 0.85, 1.15),
        }
    }
}

/// Emotion-dependent deformation of brows, eyes and mouth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpressionGeometry {
    /// Vertical shift of the inner brow end; positive raises.
    pub brow_inner: f64,
    pub brow_outer: f64,
    pub eye_open: f64,
    /// Positive bends the mouth into a smile.
    pub mouth_curve: f64,
    pub mouth_open: f64,
    pub mouth_width: f64,
    pub mouth_tilt: f64,
    pub nose_wrinkle: bool,
}

impl ExpressionGeometry {
    pub const NEUTRAL: ExpressionGeometry = ExpressionGeometry {
        brow_inner: 0.0,
        brow_outer: 0.0,
        eye_open: 1.0,
        mouth_curve: 0.0,
        mouth_open: 0.0,
        mouth_width: 1.0,
        mouth_tilt: 0.0,
        nose_wrinkle: false,
    };

    pub fn canonical(emotion: EmotionLabel) -> Self {
        let n = Self::NEUTRAL;
        match emotion {
            EmotionLabel::Anger => ExpressionGeometry {
                brow_inner: -0.05,
                brow_outer: 0.02,
                eye_open: 0.75,
                mouth_curve: -0.01,
                mouth_width: 0.75,
                ..n
            },
            EmotionLabel::Disgust => ExpressionGeometry {
                brow_inner: -0.03,
                brow_outer: -0.01,
                eye_open: 0.55,
                mouth_curve: -0.025,
                mouth_width: 0.9,
                mouth_tilt: 0.035,
                nose_wrinkle: true,
                ..n
            },
            EmotionLabel::Fear => ExpressionGeometry {
                brow_inner: 0.05,
                brow_outer: 0.02,
                eye_open: 1.45,
                mouth_curve: -0.01,
                mouth_open: 0.03,
                mouth_width: 1.25,
                ..n
            },
            EmotionLabel::Happiness => ExpressionGeometry {
                eye_open: 0.85,
                mouth_curve: 0.06,
                mouth_open: 0.015,
                mouth_width: 1.25,
                ..n
            },
            EmotionLabel::Sadness => ExpressionGeometry {
                brow_inner: 0.04,
                brow_outer: -0.03,
                eye_open: 0.8,
                mouth_curve: -0.05,
                mouth_width: 0.95,
                ..n
            },
            EmotionLabel::Surprised => ExpressionGeometry {
                brow_inner: 0.07,
                brow_outer: 0.07,
                eye_open: 1.5,
                mouth_open: 0.08,
                mouth_width: 0.6,
                ..n
            },
        }
    }

    /// Interpolates between neutral (0) and this geometry (1).
    pub fn scaled(&self, s: f64) -> Self {
        let n = Self::NEUTRAL;
        let lerp = |a: f64, b: f64| a + (b - a) * s;
        ExpressionGeometry {
            brow_inner: lerp(n.brow_inner, self.brow_inner),
            brow_outer: lerp(n.brow_outer, self.brow_outer),
            eye_open: lerp(n.eye_open, self.eye_open),
            mouth_curve: lerp(n.mouth_curve, self.mouth_curve),
            mouth_open: lerp(n.mouth_open, self.mouth_open),
            mouth_width: lerp(n.mouth_width, self.mouth_width),
            mouth_tilt: lerp(n.mouth_tilt, self.mouth_tilt),
            nose_wrinkle: self.nose_wrinkle && s > 0.5,
        }
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Intensity (before noise and tint) at normalized point `p`.
fn shade(p: (f64, f64), t: &IdentityTraits, e: &ExpressionGeometry, style: &FaceStyle) -> f64 {
    let (cx, cy) = t.center;
    let (rx, ry) = t.face_radii;
    let fx = (p.0 - cx) / rx;
    let fy = (p.1 - cy) / ry;
    if fx * fx + fy * fy > 1.0 {
        return style.background;
    }
    let skin = (style.skin + t.skin_offset + t.light_gradient * fx).clamp(0.0, 1.0);
    let ink = style.feature;

    // Eyes.
    let eye_y = cy + t.eye_height;
    for side in [-1.0, 1.0] {
        let ex = cx + side * t.eye_spacing;
        let rxe = t.eye_radius * 1.3;
        let rye = (t.eye_radius * e.eye_open).max(0.004);
        if ((p.0 - ex) / rxe).powi(2) + ((p.1 - eye_y) / rye).powi(2) <= 1.0 {
            return ink;
        }
    }

    // Brows: inner end near the midline, outer end lateral. Image y grows
    // downward, so raising subtracts.
    let brow_y = eye_y - t.brow_gap;
    for side in [-1.0, 1.0] {
        let inner = (cx + side * (t.eye_spacing - t.brow_length * 0.45), brow_y - e.brow_inner);
        let outer = (cx + side * (t.eye_spacing + t.brow_length * 0.55), brow_y - e.brow_outer);
        if segment_distance(p, inner, outer) <= 0.014 {
            return ink;
        }
    }

    if e.nose_wrinkle {
        for side in [-1.0, 1.0] {
            let a = (cx + side * 0.035, cy + 0.02);
            let b = (cx + side * 0.06, cy + 0.06);
            if segment_distance(p, a, b) <= 0.008 {
                return ink + 0.6 * (skin - ink);
            }
        }
    }

    // Mouth.
    let half = t.mouth_width * e.mouth_width * 0.5;
    let my = cy + t.mouth_height;
    let s = (p.0 - cx) / half;
    if s.abs() <= 1.0 {
        let bend = 1.0 - s * s;
        let mid = my + e.mouth_curve * bend + e.mouth_tilt * s;
        let open = e.mouth_open * bend.sqrt();
        if (p.1 - mid).abs() <= open + 0.012 {
            return ink;
        }
    }
    skin
}

/// Renders a face at `size`×`size` with 1 or 3 channels. Pixel noise is
/// drawn from `noise_seed`, so the output is a pure function of the inputs.
pub fn render_face(
    traits: &IdentityTraits,
    expression: &ExpressionGeometry,
    style: &FaceStyle,
    size: usize,
    channels: usize,
    noise_seed: u64,
) -> ImageTensor {
    assert!(channels == 1 || channels == 3, "1 or 3 channels");
    const SS: usize = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let mut data = Vec::with_capacity(size * size * channels);
    let step = 1.0 / (size * SS) as f64;
    for y in 0..size {
        for x in 0..size {
            let mut acc = 0.0;
            for sy in 0..SS {
                for sx in 0..SS {
                    let p = (
                        ((x * SS + sx) as f64 + 0.5) * step,
                        ((y * SS + sy) as f64 + 0.5) * step,
                    );
                    acc += shade(p, traits, expression, style);
                }
            }
            let base = acc / (SS * SS) as f64;
            let noise: f64 = if style.noise > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                style.noise * z
            } else {
                0.0
            };
            if channels == 1 {
                data.push((base + noise).clamp(0.0, 1.0) as f32);
            } else {
                for tint in style.tint {
                    data.push((base * tint + noise).clamp(0.0, 1.0) as f32);
                }
            }
        }
    }
    ImageTensor::new(size, size, channels, data).expect("consistent size")
}

/// Deterministic latent for identity `index` of a corpus seeded by `seed`.
pub fn identity_latent(seed: u64, index: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// One labeled rendering of a toy corpus.
#[derive(Clone, Debug)]
pub struct ToyFace {
    pub identity_id: String,
    pub emotion: EmotionLabel,
    pub image: ImageTensor,
}

/// Renders `identities` × 6 labeled faces. Identity ids are
/// `{prefix}{index:05}`.
pub fn toy_corpus(
    prefix: &str,
    identities: usize,
    size: usize,
    channels: usize,
    style: &FaceStyle,
    seed: u64,
) -> Vec<ToyFace> {
    let mut out = Vec::with_capacity(identities * 6);
    for i in 0..identities {
        let latent = identity_latent(seed, i as u64, TRAIT_DIMS);
        let traits = IdentityTraits::from_latent(&latent);
        let mut jitter = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64).rotate_left(17));
        for emotion in EmotionLabel::ALL {
            let gain = traits.expression_gain * style.expressiveness * jitter.random_range(0.9..1.1);
            let expr = ExpressionGeometry::canonical(emotion).scaled(gain);
            let noise_seed = seed
                .wrapping_mul(31)
                .wrapping_add((i * 6 + emotion.index()) as u64);
            out.push(ToyFace {
                identity_id: format!("{prefix}{i:05}"),
                emotion,
                image: render_face(&traits, &expr, style, size, channels, noise_seed),
            });
        }
    }
    out
}

/// [`toy_corpus`] as a dataset of real-provenance faces tagged `source_db`.
pub fn toy_dataset(
    prefix: &str,
    identities: usize,
    size: usize,
    style: &FaceStyle,
    seed: u64,
    source_db: &str,
) -> FaceDataset {
    let records = toy_corpus(prefix, identities, size, 1, style, seed)
        .into_iter()
        .map(|f| LabeledFace::new(f.image, f.emotion, f.identity_id, Provenance::Real, source_db))
        .collect();
    FaceDataset::new(records).expect("toy ids are unique")
}

/// Renders a toy corpus into `dir` (PNG files plus `manifest.csv`) and
/// returns the manifest path.
pub fn write_toy_corpus(
    dir: &Path,
    prefix: &str,
    identities: usize,
    size: usize,
    style: &FaceStyle,
    seed: u64,
) -> Result<PathBuf> {
    save_dataset(dir, &toy_dataset(prefix, identities, size, style, seed, prefix))?;
    Ok(dir.join("manifest.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emotions_render_differently() {
        let traits = IdentityTraits::from_latent(&[0.0; TRAIT_DIMS]);
        let style = FaceStyle {
            noise: 0.0,
            ..FaceStyle::studio()
        };
        let imgs: Vec<_> = EmotionLabel::ALL
            .iter()
            .map(|&e| render_face(&traits, &ExpressionGeometry::canonical(e), &style, 32, 1, 0))
            .collect();
        for i in 0..6 {
            for j in i + 1..6 {
                assert_ne!(imgs[i], imgs[j], "{:?} vs {:?}", EmotionLabel::ALL[i], EmotionLabel::ALL[j]);
            }
        }
    }

    #[test]
    fn rendering_is_deterministic_and_in_range() {
        let traits = IdentityTraits::from_latent(&identity_latent(3, 7, TRAIT_DIMS));
        let e = ExpressionGeometry::canonical(EmotionLabel::Fear);
        let a = render_face(&traits, &e, &FaceStyle::field(), 48, 3, 11);
        let b = render_face(&traits, &e, &FaceStyle::field(), 48, 3, 11);
        assert_eq!(a, b);
        assert_eq!(a.shape(), (48, 48, 3));
        assert!(a.in_unit_range());
    }

    #[test]
    fn toy_corpus_is_balanced() {
        let faces = toy_corpus("t", 3, 16, 1, &FaceStyle::studio(), 1);
        assert_eq!(faces.len(), 18);
        for id in ["t00000", "t00001", "t00002"] {
            let mut labels: Vec<_> = faces
                .iter()
                .filter(|f| f.identity_id == id)
                .map(|f| f.emotion)
                .collect();
            labels.sort();
            assert_eq!(labels, EmotionLabel::ALL);
        }
    }
}
