use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// H×W×C array of intensities in row-major, channel-last order. Stored values
/// live in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::shape(
                format!("{height}x{width}x{channels}"),
                format!("{} values", data.len()),
            ));
        }
        Ok(ImageTensor {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Self {
        ImageTensor {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    /// SHA-256 over the shape and little-endian pixel bytes.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for d in [self.height, self.width, self.channels] {
            h.update((d as u64).to_le_bytes());
        }
        for v in &self.data {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Single-channel data widened to f64, for network input.
    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    pub fn from_f64(height: usize, width: usize, channels: usize, data: &[f64]) -> Result<Self> {
        Self::new(height, width, channels, data.iter().map(|&v| v as f32).collect())
    }

    /// Decodes any PNG/JPEG. Grayscale files load as one channel, everything
    /// else as RGB.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let gray = matches!(
            img.color(),
            image::ColorType::L8 | image::ColorType::L16 | image::ColorType::La8 | image::ColorType::La16
        );
        if gray {
            let buf = img.to_luma8();
            let data = buf.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
            ImageTensor::new(h, w, 1, data)
        } else {
            let buf = img.to_rgb8();
            let data = buf.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
            ImageTensor::new(h, w, 3, data)
        }
    }

    /// Writes an 8-bit PNG (gray for 1 channel, RGB for 3), creating parent
    /// directories as needed.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        let color = match self.channels {
            1 => image::ExtendedColorType::L8,
            3 => image::ExtendedColorType::Rgb8,
            c => return Err(Error::shape("1 or 3 channels", format!("{c} channels"))),
        };
        image::save_buffer(path, &bytes, self.width as u32, self.height as u32, color).map_err(
            |e| Error::Image {
                path: path.to_path_buf(),
                message: e.to_string(),
            },
        )
    }

    /// Rounds every value to the 8-bit grid, matching a save/load round trip.
    pub fn quantized(&self) -> Self {
        ImageTensor {
            data: self
                .data
                .iter()
                .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
                .collect(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<f32> = (0..64).map(|i| i as f32 / 63.0).collect();
        let img = ImageTensor::new(8, 8, 1, data).unwrap();
        let path = dir.path().join("a.png");
        img.save_png(&path).unwrap();
        let back = ImageTensor::load(&path).unwrap();
        assert_eq!(back, img.quantized());
    }

    #[test]
    fn rejects_bad_length() {
        assert!(ImageTensor::new(2, 2, 1, vec![0.0; 3]).is_err());
    }
}
