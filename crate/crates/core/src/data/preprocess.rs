use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// Luminance weights for RGB → gray.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Face rectangle in pixel coordinates of the source image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaceBox {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl FaceBox {
    pub fn full(height: usize, width: usize) -> Self {
        FaceBox {
            x: 0,
            y: 0,
            width,
            height,
        }
    }
}

/// Manifest encoding: `"x y w h"`.
impl fmt::Display for FaceBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.x, self.y, self.width, self.height)
    }
}

impl FromStr for FaceBox {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let v: Vec<usize> = s
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| format!("face_box {s:?}: {e}")))
            .collect::<std::result::Result<_, _>>()?;
        match v[..] {
            [x, y, width, height] => Ok(FaceBox { x, y, width, height }),
            _ => Err(format!("face_box {s:?}: expected four integers \"x y w h\"")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    /// Output side length in pixels.
    pub output_size: usize,
    /// Side fraction of the centered crop used when no face box is given.
    pub crop_fraction: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            output_size: 64,
            crop_fraction: 0.8,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.output_size == 0 {
            return Err(Error::InvalidConfig("preprocess.output_size must be positive".into()));
        }
        if !(self.crop_fraction > 0.0 && self.crop_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "preprocess.crop_fraction must be in (0, 1], got {}",
                self.crop_fraction
            )));
        }
        Ok(())
    }
}

fn crop(image: &ImageTensor, b: FaceBox) -> ImageTensor {
    let c = image.channels();
    let mut data = Vec::with_capacity(b.width * b.height * c);
    for y in b.y..b.y + b.height {
        for x in b.x..b.x + b.width {
            for ch in 0..c {
                data.push(image.get(y, x, ch));
            }
        }
    }
    ImageTensor::new(b.height, b.width, c, data).expect("crop size")
}

/// Luminance-weighted gray conversion; one-channel input is returned as is.
pub fn to_grayscale(image: &ImageTensor) -> Result<ImageTensor> {
    match image.channels() {
        1 => Ok(image.clone()),
        3 | 4 => {
            let c = image.channels();
            let data = image
                .data()
                .chunks(c)
                .map(|px| {
                    (LUMA[0] * px[0] as f64 + LUMA[1] * px[1] as f64 + LUMA[2] * px[2] as f64) as f32
                })
                .collect();
            ImageTensor::new(image.height(), image.width(), 1, data)
        }
        c => Err(Error::shape("1, 3 or 4 channels", format!("{c} channels"))),
    }
}

/// Bilinear resampling with pixel-center alignment; the identity when the
/// size is unchanged.
pub fn bilinear_resize(image: &ImageTensor, out_h: usize, out_w: usize) -> ImageTensor {
    let (h, w, c) = image.shape();
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    let mut data = Vec::with_capacity(out_h * out_w * c);
    for oy in 0..out_h {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = fy - y0 as f64;
        for ox in 0..out_w {
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let tx = fx - x0 as f64;
            for ch in 0..c {
                let a = image.get(y0, x0, ch) as f64;
                let b = image.get(y0, x1, ch) as f64;
                let cc = image.get(y1, x0, ch) as f64;
                let d = image.get(y1, x1, ch) as f64;
                let top = a + (b - a) * tx;
                let bot = cc + (d - cc) * tx;
                data.push((top + (bot - top) * ty) as f32);
            }
        }
    }
    ImageTensor::new(out_h, out_w, c, data).expect("resize size")
}

/// Crop (face box, else centered `crop_fraction`), gray-scale, then bilinear
/// resize to `output_size`² with values clamped to [0, 1].
pub fn preprocess(image: &ImageTensor, face_box: Option<FaceBox>, cfg: &PreprocessConfig) -> Result<ImageTensor> {
    cfg.validate()?;
    let (h, w, _) = image.shape();
    if image.is_empty() {
        return Err(Error::shape("nonempty image", "0 pixels"));
    }
    let b = match face_box {
        Some(b) => {
            if b.width == 0 || b.height == 0 {
                return Err(Error::DegenerateFaceBox([b.x, b.y, b.width, b.height]));
            }
            if b.x + b.width > w || b.y + b.height > h {
                return Err(Error::shape(
                    format!("face box within {h}x{w}"),
                    format!("{b:?}"),
                ));
            }
            b
        }
        None => {
            let ch = ((h as f64 * cfg.crop_fraction).round() as usize).clamp(1, h);
            let cw = ((w as f64 * cfg.crop_fraction).round() as usize).clamp(1, w);
            FaceBox {
                x: (w - cw) / 2,
                y: (h - ch) / 2,
                width: cw,
                height: ch,
            }
        }
    };
    let cropped = if b == FaceBox::full(h, w) {
        image.clone()
    } else {
        crop(image, b)
    };
    let gray = to_grayscale(&cropped)?;
    let resized = bilinear_resize(&gray, cfg.output_size, cfg.output_size);
    let data = resized.data().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    ImageTensor::new(cfg.output_size, cfg.output_size, 1, data)
}
