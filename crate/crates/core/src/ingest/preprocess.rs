//! Aspect-preserving resize to a 224 px short side, center crop, and
//! per-channel normalization.

use crate::error::Result;
use crate::ingest::frame::{FrameImage, InputTensor, Normalization, CHANNELS, INPUT_SIDE};
use crate::Stream;

/// Geometry of the resize + center crop for a given input size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResizePlan {
    /// `224 / min(width, height)`, applied to both axes.
    pub scale: f64,
    pub resized_width: usize,
    pub resized_height: usize,
    pub crop_x: usize,
    pub crop_y: usize,
}

pub fn plan_resize(width: usize, height: usize) -> ResizePlan {
    assert!(width > 0 && height > 0, "empty image");
    let side = INPUT_SIDE as f64;
    let scale = side / width.min(height) as f64;
    let (resized_width, resized_height) = if width <= height {
        (INPUT_SIDE, ((height as f64 * scale).round() as usize).max(INPUT_SIDE))
    } else {
        (((width as f64 * scale).round() as usize).max(INPUT_SIDE), INPUT_SIDE)
    };
    ResizePlan {
        scale,
        resized_width,
        resized_height,
        crop_x: (resized_width - INPUT_SIDE) / 2,
        crop_y: (resized_height - INPUT_SIDE) / 2,
    }
}

/// Interleaved 3-channel float image in 0..=255 intensity units.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImageF32 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl RgbImageF32 {
    pub fn from_frame(frame: &FrameImage) -> Self {
        RgbImageF32 {
            width: frame.width() as usize,
            height: frame.height() as usize,
            data: frame.pixels().iter().map(|&p| f32::from(p)).collect(),
        }
    }
}

/// Source sampling taps for one output coordinate.
#[derive(Clone, Copy)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: f32,
}

/// Bilinear taps with pixel-center alignment: output `o` of the resized axis
/// samples the source at `(o + 0.5) * src / dst - 0.5`, clamped to the edge.
fn taps(src: usize, dst: usize, offset: usize) -> Vec<Tap> {
    let ratio = src as f64 / dst as f64;
    (0..INPUT_SIDE)
        .map(|o| {
            let s = (((o + offset) as f64 + 0.5) * ratio - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            Tap {
                lo,
                hi,
                frac: (s - lo as f64) as f32,
            }
        })
        .collect()
}

/// Resizes so the short side is 224 px and returns the centered 224×224 crop
/// (HWC, unnormalized).
pub fn resize_and_crop(img: &RgbImageF32) -> Vec<f32> {
    let plan = plan_resize(img.width, img.height);
    let xs = taps(img.width, plan.resized_width, plan.crop_x);
    let ys = taps(img.height, plan.resized_height, plan.crop_y);
    let stride = img.width * CHANNELS;
    let mut out = Vec::with_capacity(InputTensor::LEN);
    for ty in &ys {
        let row0 = &img.data[ty.lo * stride..(ty.lo + 1) * stride];
        let row1 = &img.data[ty.hi * stride..(ty.hi + 1) * stride];
        for tx in &xs {
            for c in 0..CHANNELS {
                let a = row0[tx.lo * CHANNELS + c];
                let b = row0[tx.hi * CHANNELS + c];
                let top = if tx.frac == 0.0 { a } else { a + (b - a) * tx.frac };
                let a = row1[tx.lo * CHANNELS + c];
                let b = row1[tx.hi * CHANNELS + c];
                let bottom = if tx.frac == 0.0 { a } else { a + (b - a) * tx.frac };
                out.push(if ty.frac == 0.0 { top } else { top + (bottom - top) * ty.frac });
            }
        }
    }
    out
}

pub(crate) fn to_tensor(
    img: &RgbImageF32,
    norm: &Normalization,
    stream: Stream,
    timestamp_s: f64,
) -> Result<InputTensor> {
    let mut values = resize_and_crop(img);
    for px in values.chunks_exact_mut(CHANNELS) {
        for (c, v) in px.iter_mut().enumerate() {
            *v = norm.apply(c, *v);
        }
    }
    InputTensor::new(values, stream, timestamp_s)
}

/// Turns a decoded frame into a static-stream network input.
pub fn preprocess_frame(frame: &FrameImage, norm: &Normalization) -> Result<InputTensor> {
    norm.validate()?;
    to_tensor(&RgbImageF32::from_frame(frame), norm, Stream::Static, frame.timestamp_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn landscape_720p_plan() {
        let p = plan_resize(1280, 720);
        assert_eq!((p.resized_width, p.resized_height), (398, 224));
        assert_eq!((p.crop_x, p.crop_y), (87, 0));
    }

    #[test]
    fn tall_image_plan() {
        let p = plan_resize(224, 500);
        assert_eq!((p.resized_width, p.resized_height), (224, 500));
        assert_eq!(p.crop_y, 138);
        assert_eq!(p.crop_y + INPUT_SIDE - 1, 361);
        assert_eq!(p.scale, 1.0);
    }

    #[test]
    fn identity_at_native_size() {
        let pixels: Vec<u8> = (0..224 * 224 * 3).map(|i| (i * 7 % 256) as u8).collect();
        let frame = FrameImage::new(224, 224, pixels.clone(), 0.0).unwrap();
        let t = preprocess_frame(&frame, &Normalization::IDENTITY).unwrap();
        let back: Vec<f32> = pixels.iter().map(|&p| f32::from(p)).collect();
        assert_eq!(t.values(), back.as_slice());
    }

    #[test]
    fn tall_crop_keeps_middle_rows() {
        // Each row carries its own index so the crop window is visible.
        let mut pixels = Vec::with_capacity(224 * 500 * 3);
        for y in 0..500u32 {
            for _ in 0..224 {
                let v = (y % 256) as u8;
                pixels.extend_from_slice(&[v, (y / 256) as u8, 0]);
            }
        }
        let frame = FrameImage::new(224, 500, pixels, 0.0).unwrap();
        let t = preprocess_frame(&frame, &Normalization::IDENTITY).unwrap();
        let row = |y: usize| t.at(y, 0, 0) + 256.0 * t.at(y, 0, 1);
        assert_eq!(row(0), 138.0);
        assert_eq!(row(223), 361.0);
    }

    #[test]
    fn mean_subtraction_and_scaling() {
        let frame = FrameImage::filled(300, 200, [200, 100, 50], 1.5).unwrap();
        let norm = Normalization {
            means: [100.0, 100.0, 100.0],
            scales: [2.0, 1.0, 0.5],
        };
        let t = preprocess_frame(&frame, &norm).unwrap();
        assert_eq!(t.timestamp_s, 1.5);
        assert_eq!(t.stream, Stream::Static);
        for px in t.values().chunks_exact(3) {
            assert_eq!(px, &[50.0, 0.0, -100.0]);
        }
    }

    #[test]
    fn invalid_normalization_rejected() {
        let frame = FrameImage::filled(4, 4, [0, 0, 0], 0.0).unwrap();
        let norm = Normalization {
            means: [0.0; 3],
            scales: [1.0, 0.0, 1.0],
        };
        assert!(preprocess_frame(&frame, &norm).is_err());
    }

    #[test]
    fn one_pixel_input() {
        let frame = FrameImage::filled(1, 1, [9, 8, 7], 0.0).unwrap();
        let t = preprocess_frame(&frame, &Normalization::IDENTITY).unwrap();
        assert!(t.values().chunks_exact(3).all(|px| px == [9.0, 8.0, 7.0]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn output_is_always_224_square(w in 1usize..700, h in 1usize..700) {
            let frame = FrameImage::filled(w as u32, h as u32, [1, 2, 3], 0.0).unwrap();
            let t = preprocess_frame(&frame, &Normalization::IDENTITY).unwrap();
            prop_assert_eq!(t.values().len(), 224 * 224 * 3);
            let p = plan_resize(w, h);
            prop_assert_eq!(p.resized_width.min(p.resized_height), 224);
            prop_assert!(p.crop_x + 224 <= p.resized_width);
            prop_assert!(p.crop_y + 224 <= p.resized_height);
        }

        #[test]
        fn deterministic(w in 1u32..64, h in 1u32..64, seed in any::<u64>()) {
            let pixels: Vec<u8> = (0..(w * h * 3) as u64).map(|i| (i.wrapping_mul(seed | 1) >> 3) as u8).collect();
            let frame = FrameImage::new(w, h, pixels, 0.0).unwrap();
            let a = preprocess_frame(&frame, &Normalization::IDENTITY).unwrap();
            let b = preprocess_frame(&frame.clone(), &Normalization::IDENTITY).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
