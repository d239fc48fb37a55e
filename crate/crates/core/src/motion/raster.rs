//! Encoding of a motion field as a 3-channel image.
//!
//! Channel 0 carries `dx`, channel 1 `dy`, each mapped affinely from
//! `[-R, R]` onto `[0, 255]` and clamped; channel 2 carries the vector length
//! mapped from `[0, R·√2]`. Pixels not covered by any vector keep the neutral
//! value: mid-gray in channels 0–1, zero in channel 2.

use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{to_tensor, InputTensor, Normalization, RgbImageF32, CHANNELS};
use crate::motion::MotionVectorField;
use crate::Stream;

/// Displacement (pixels) mapped to full intensity.
pub const CLAMP_RADIUS: f32 = 32.0;

const MAX_INTENSITY: f32 = 255.0;
const MIDPOINT: f32 = MAX_INTENSITY / 2.0;

fn encode_axis(d: f32) -> f32 {
    (d.clamp(-CLAMP_RADIUS, CLAMP_RADIUS) + CLAMP_RADIUS) / (2.0 * CLAMP_RADIUS) * MAX_INTENSITY
}

fn encode_magnitude(dx: f32, dy: f32) -> f32 {
    let max = CLAMP_RADIUS * std::f32::consts::SQRT_2;
    dx.hypot(dy).min(max) / max * MAX_INTENSITY
}

/// Renders the field at frame resolution (float intensities in 0..=255).
pub fn render_field(field: &MotionVectorField) -> RgbImageF32 {
    let (w, h) = (field.frame_w.max(1) as usize, field.frame_h.max(1) as usize);
    let mut data = Vec::with_capacity(w * h * CHANNELS);
    for _ in 0..w * h {
        data.extend_from_slice(&[MIDPOINT, MIDPOINT, 0.0]);
    }
    for v in &field.vectors {
        let px = [encode_axis(v.dx), encode_axis(v.dy), encode_magnitude(v.dx, v.dy)];
        let x0 = v.x.clamp(0, w as i32) as usize;
        let y0 = v.y.clamp(0, h as i32) as usize;
        let x1 = (v.x + v.block_w as i32).clamp(0, w as i32) as usize;
        let y1 = (v.y + v.block_h as i32).clamp(0, h as i32) as usize;
        for y in y0..y1 {
            for x in x0..x1 {
                let i = (y * w + x) * CHANNELS;
                data[i..i + CHANNELS].copy_from_slice(&px);
            }
        }
    }
    RgbImageF32 {
        width: w,
        height: h,
        data,
    }
}

/// Renders the field and applies the static stream's resize, crop and
/// normalization to obtain a motion-stream network input.
pub fn rasterize_field(field: &MotionVectorField, norm: &Normalization) -> Result<InputTensor> {
    norm.validate()?;
    to_tensor(&render_field(field), norm, Stream::Motion, field.timestamp_s)
}

/// Writes the rendered field as an 8-bit PNG (debug aid).
pub fn save_field_png(field: &MotionVectorField, path: &Path) -> Result<()> {
    let img = render_field(field);
    let bytes: Vec<u8> = img.data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    let buf = image::RgbImage::from_raw(img.width as u32, img.height as u32, bytes)
        .expect("buffer sized from the rendered image");
    buf.save(path).map_err(|e| Error::io(
        format!("writing {}", path.display()),
        std::io::Error::other(e),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::MotionVector;
    use proptest::prelude::*;

    fn field_with(vectors: Vec<MotionVector>) -> MotionVectorField {
        MotionVectorField {
            vectors,
            inter_coded: true,
            ..MotionVectorField::empty(0, 0.0, 64, 48)
        }
    }

    fn block(x: i32, y: i32, dx: f32, dy: f32) -> MotionVector {
        MotionVector {
            x,
            y,
            dx,
            dy,
            block_w: 16,
            block_h: 16,
        }
    }

    fn at(img: &RgbImageF32, x: usize, y: usize) -> [f32; 3] {
        let i = (y * img.width + x) * 3;
        [img.data[i], img.data[i + 1], img.data[i + 2]]
    }

    #[test]
    fn zero_field_is_neutral() {
        let vectors = (0..3)
            .flat_map(|by| (0..4).map(move |bx| block(bx * 16, by * 16, 0.0, 0.0)))
            .collect();
        let img = render_field(&field_with(vectors));
        assert!(img.data.chunks_exact(3).all(|p| p == [127.5, 127.5, 0.0]));
        // An empty field renders identically.
        assert_eq!(render_field(&field_with(vec![])), img);
    }

    #[test]
    fn full_positive_dx() {
        let img = render_field(&field_with(vec![block(16, 16, 32.0, 0.0)]));
        let p = at(&img, 20, 20);
        assert_eq!(p[0], 255.0);
        assert_eq!(p[1], 127.5);
        // |(32, 0)| = R, i.e. 1/sqrt(2) of the magnitude range.
        assert!((p[2] - 255.0 / std::f32::consts::SQRT_2).abs() < 1e-3);
        // Outside the block stays neutral.
        assert_eq!(at(&img, 0, 0), [127.5, 127.5, 0.0]);
    }

    #[test]
    fn full_negative_diagonal() {
        let img = render_field(&field_with(vec![block(0, 0, -32.0, -32.0)]));
        let p = at(&img, 3, 3);
        assert_eq!(p[0], 0.0);
        assert_eq!(p[1], 0.0);
        assert!((p[2] - 255.0).abs() < 1e-3);
    }

    #[test]
    fn values_clamped_beyond_radius() {
        let img = render_field(&field_with(vec![block(0, 0, 100.0, -100.0)]));
        assert_eq!(at(&img, 1, 1), [255.0, 0.0, 255.0]);
    }

    #[test]
    fn rasterized_tensor_is_valid() {
        let t = rasterize_field(&field_with(vec![block(0, 0, 5.0, 1.0)]), &Normalization::IDENTITY).unwrap();
        assert_eq!(t.stream, Stream::Motion);
        assert!(t.validate().is_ok());
    }

    #[test]
    fn png_dump() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.png");
        save_field_png(&field_with(vec![block(0, 0, 32.0, 0.0)]), &path).unwrap();
        let img = image::open(&path).unwrap().to_rgb8();
        assert_eq!(img.dimensions(), (64, 48));
        assert_eq!(img.get_pixel(0, 0).0, [255, 128, 180]);
    }

    proptest! {
        #[test]
        fn negation_reflects_direction_channels(
            dxs in proptest::collection::vec((-40.0f32..40.0, -40.0f32..40.0), 12)
        ) {
            let make = |sign: f32| {
                let vectors = dxs
                    .iter()
                    .enumerate()
                    .map(|(i, &(dx, dy))| block((i as i32 % 4) * 16, (i as i32 / 4) * 16, sign * dx, sign * dy))
                    .collect();
                field_with(vectors)
            };
            let a = rasterize_field(&make(1.0), &Normalization::IDENTITY).unwrap();
            let b = rasterize_field(&make(-1.0), &Normalization::IDENTITY).unwrap();
            for (pa, pb) in a.values().chunks_exact(3).zip(b.values().chunks_exact(3)) {
                prop_assert!((pa[0] + pb[0] - 255.0).abs() < 1e-3);
                prop_assert!((pa[1] + pb[1] - 255.0).abs() < 1e-3);
                prop_assert!((pa[2] - pb[2]).abs() < 1e-3);
            }
        }
    }
}
