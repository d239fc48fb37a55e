use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Stream;

/// Side length of every network input.
pub const INPUT_SIDE: usize = 224;
pub const CHANNELS: usize = 3;

/// A decoded RGB frame, row-major, interleaved `RGBRGB…`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
    pub timestamp_s: f64,
}

impl FrameImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>, timestamp_s: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!("frame size {width}x{height}")));
        }
        let expected = width as usize * height as usize * CHANNELS;
        if pixels.len() != expected {
            return Err(Error::InvalidInput(format!(
                "pixel buffer of {} bytes for a {width}x{height} RGB frame (expected {expected})",
                pixels.len()
            )));
        }
        Ok(FrameImage {
            width,
            height,
            pixels,
            timestamp_s,
        })
    }

    /// Uniform color frame.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3], timestamp_s: f64) -> Result<Self> {
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * CHANNELS)
            .collect();
        FrameImage::new(width, height, pixels, timestamp_s)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * CHANNELS;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// Per-channel affine normalization `(value - mean) / scale`, with values in
/// 0..=255 intensity units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub means: [f32; 3],
    pub scales: [f32; 3],
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization {
        means: [0.0; 3],
        scales: [1.0; 3],
    };

    pub fn validate(&self) -> Result<()> {
        let ok = self.means.iter().all(|m| m.is_finite())
            && self.scales.iter().all(|s| s.is_finite() && *s != 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid normalization constants {self:?}")))
        }
    }

    #[inline]
    pub fn apply(&self, channel: usize, value: f32) -> f32 {
        (value - self.means[channel]) / self.scales[channel]
    }
}

/// A 224×224×3 network input in HWC order.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTensor {
    values: Vec<f32>,
    pub stream: Stream,
    pub timestamp_s: f64,
}

impl InputTensor {
    pub const SIDE: usize = INPUT_SIDE;
    pub const LEN: usize = INPUT_SIDE * INPUT_SIDE * CHANNELS;

    pub fn new(values: Vec<f32>, stream: Stream, timestamp_s: f64) -> Result<Self> {
        let t = InputTensor {
            values,
            stream,
            timestamp_s,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != Self::LEN {
            return Err(Error::DimensionMismatch {
                expected: Self::LEN,
                got: self.values.len(),
            });
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite tensor value at index {i}")));
        }
        Ok(())
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f32 {
        self.values[(y * INPUT_SIDE + x) * CHANNELS + c]
    }

    /// Values reordered to CHW.
    pub fn to_chw(&self) -> Vec<f32> {
        let plane = INPUT_SIDE * INPUT_SIDE;
        let mut out = vec![0.0; Self::LEN];
        for (i, px) in self.values.chunks_exact(CHANNELS).enumerate() {
            for (c, v) in px.iter().enumerate() {
                out[c * plane + i] = *v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_buffer_length_checked() {
        assert!(FrameImage::new(2, 2, vec![0; 12], 0.0).is_ok());
        assert!(FrameImage::new(2, 2, vec![0; 11], 0.0).is_err());
        assert!(FrameImage::new(0, 2, vec![], 0.0).is_err());
    }

    #[test]
    fn tensor_rejects_nan_and_bad_shape() {
        let mut v = vec![0.0; InputTensor::LEN];
        assert!(InputTensor::new(v.clone(), Stream::Static, 0.0).is_ok());
        v[17] = f32::NAN;
        assert!(InputTensor::new(v, Stream::Static, 0.0).is_err());
        assert!(InputTensor::new(vec![0.0; 10], Stream::Static, 0.0).is_err());
    }

    #[test]
    fn chw_reorder() {
        let v: Vec<f32> = (0..InputTensor::LEN).map(|i| i as f32).collect();
        let t = InputTensor::new(v, Stream::Motion, 0.0).unwrap();
        let chw = t.to_chw();
        let plane = INPUT_SIDE * INPUT_SIDE;
        assert_eq!(chw[0], t.at(0, 0, 0));
        assert_eq!(chw[plane + 5], t.at(0, 5, 1));
        assert_eq!(chw[2 * plane + INPUT_SIDE * 3 + 7], t.at(3, 7, 2));
    }
}
