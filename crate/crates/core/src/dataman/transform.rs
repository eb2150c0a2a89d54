use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DataError;

/// Interleaved 8-bit image, `height x width x channels`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelBuffer {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<u8>,
}

impl PixelBuffer {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<u8>,
    ) -> Result<Self, DataError> {
        if height == 0 || width == 0 {
            return Err(DataError::InvalidImage(format!(
                "{height}x{width} image has no pixels"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(DataError::InvalidImage(format!(
                "{channels} channels (expected 1 or 3)"
            )));
        }
        if data.len() != height * width * channels {
            return Err(DataError::InvalidImage(format!(
                "buffer has {} bytes, expected {}",
                data.len(),
                height * width * channels
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(
        height: usize,
        width: usize,
        channels: usize,
        value: u8,
    ) -> Result<Self, DataError> {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
        )
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> &[u8] {
        let at = (y * self.width + x) * self.channels;
        &self.data[at..at + self.channels]
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                data.extend_from_slice(self.pixel(y, x));
            }
        }
        Self { data, ..*self }
    }

    /// Bilinear resampling with pixel-centre alignment.
    pub fn resize(&self, height: usize, width: usize) -> Self {
        if (height, width) == (self.height, self.width) {
            return self.clone();
        }
        let c = self.channels;
        let mut data = vec![0u8; height * width * c];
        let sy = self.height as f32 / height as f32;
        let sx = self.width as f32 / width as f32;
        for y in 0..height {
            let fy = ((y as f32 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f32);
            let (y0, wy) = (fy.floor() as usize, fy - fy.floor());
            let y1 = (y0 + 1).min(self.height - 1);
            for x in 0..width {
                let fx = ((x as f32 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f32);
                let (x0, wx) = (fx.floor() as usize, fx - fx.floor());
                let x1 = (x0 + 1).min(self.width - 1);
                for ch in 0..c {
                    let v = |yy: usize, xx: usize| {
                        f32::from(self.data[(yy * self.width + xx) * c + ch])
                    };
                    let top = v(y0, x0) * (1.0 - wx) + v(y0, x1) * wx;
                    let bottom = v(y1, x0) * (1.0 - wx) + v(y1, x1) * wx;
                    data[(y * width + x) * c + ch] = (top * (1.0 - wy) + bottom * wy).round() as u8;
                }
            }
        }
        Self {
            height,
            width,
            channels: c,
            data,
        }
    }

    /// Edge-replicated padding of `pad` pixels on every side.
    pub fn pad_replicate(&self, pad: usize) -> Self {
        let (h, w) = (self.height + 2 * pad, self.width + 2 * pad);
        let mut data = Vec::with_capacity(h * w * self.channels);
        for y in 0..h {
            let sy = y.saturating_sub(pad).min(self.height - 1);
            for x in 0..w {
                let sx = x.saturating_sub(pad).min(self.width - 1);
                data.extend_from_slice(self.pixel(sy, sx));
            }
        }
        Self {
            height: h,
            width: w,
            channels: self.channels,
            data,
        }
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Self {
        debug_assert!(top + height <= self.height && left + width <= self.width);
        let mut data = Vec::with_capacity(height * width * self.channels);
        for y in top..top + height {
            let start = (y * self.width + left) * self.channels;
            data.extend_from_slice(&self.data[start..start + width * self.channels]);
        }
        Self {
            height,
            width,
            channels: self.channels,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    RandomFlip,
    RandomCrop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    #[serde(default)]
    pub transforms: Vec<Transform>,
    pub target_height: usize,
    pub target_width: usize,
    #[serde(default = "default_pad")]
    pub pad: usize,
    #[serde(default = "default_flip_prob")]
    pub flip_prob: f64,
}

fn default_pad() -> usize {
    10
}

fn default_flip_prob() -> f64 {
    0.5
}

impl Default for TransformSpec {
    fn default() -> Self {
        Self {
            transforms: vec![Transform::RandomFlip, Transform::RandomCrop],
            target_height: 256,
            target_width: 128,
            pad: default_pad(),
            flip_prob: default_flip_prob(),
        }
    }
}

impl TransformSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.target_height == 0 || self.target_width == 0 {
            return Err(DataError::InvalidTransform(
                "target size must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(DataError::InvalidTransform(format!(
                "flip_prob {} outside [0, 1]",
                self.flip_prob
            )));
        }
        Ok(())
    }
}

/// Resizes to the target size, then applies the listed augmentations in order.
///
/// `random_crop` pads by `spec.pad` (edge replication) and cuts a
/// target-sized window at a random offset, so the output is always
/// `target_height x target_width`.
pub fn apply_transforms<R: Rng + ?Sized>(
    image: &PixelBuffer,
    spec: &TransformSpec,
    rng: &mut R,
) -> Result<PixelBuffer, DataError> {
    spec.validate()?;
    let mut out = image.resize(spec.target_height, spec.target_width);
    for t in &spec.transforms {
        out = match t {
            Transform::RandomFlip => {
                if rng.gen_bool(spec.flip_prob) {
                    out.flip_horizontal()
                } else {
                    out
                }
            }
            Transform::RandomCrop => {
                let padded = out.pad_replicate(spec.pad);
                let top = rng.gen_range(0..=2 * spec.pad);
                let left = rng.gen_range(0..=2 * spec.pad);
                padded.crop(top, left, spec.target_height, spec.target_width)
            }
        };
    }
    Ok(out)
}
