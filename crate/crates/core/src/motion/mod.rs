//! Compressed-domain motion: codec motion-vector extraction, an exhaustive
//! block-matching oracle to check it against, and rasterization of vector
//! fields into motion-stream network inputs.
//!
//! Sign convention everywhere: a vector's `(dx, dy)` is the displacement that
//! carries the block's position in the reference frame to its position in the
//! current frame.

mod extract;
mod oracle;
mod raster;

pub use extract::{decode_all_with_motion, extract_motion_vectors, DecodedMotionFrame};
pub use oracle::estimate_motion_exhaustive;
pub use raster::{rasterize_field, render_field, save_field_png, CLAMP_RADIUS};

use serde::{Deserialize, Serialize};

/// Smallest block extent kept in a field; partial border blocks below this are dropped.
pub const MIN_BLOCK_EXTENT: u32 = 8;

/// Translation of one macroblock between the reference and the current frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionVector {
    /// Top-left of the block in the current frame (the tiling anchor).
    pub x: i32,
    pub y: i32,
    pub dx: f32,
    pub dy: f32,
    pub block_w: u32,
    pub block_h: u32,
}

impl MotionVector {
    /// Top-left of the matched block in the reference frame.
    pub fn reference_position(&self) -> (f32, f32) {
        (self.x as f32 - self.dx, self.y as f32 - self.dy)
    }

    pub fn is_zero(&self) -> bool {
        self.dx == 0.0 && self.dy == 0.0
    }
}

/// All macroblock vectors of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionVectorField {
    pub frame_index: usize,
    pub timestamp_s: f64,
    pub frame_w: u32,
    pub frame_h: u32,
    /// False when the frame carries no inter-frame prediction at all.
    pub inter_coded: bool,
    pub vectors: Vec<MotionVector>,
}

impl MotionVectorField {
    pub fn empty(frame_index: usize, timestamp_s: f64, frame_w: u32, frame_h: u32) -> Self {
        MotionVectorField {
            frame_index,
            timestamp_s,
            frame_w,
            frame_h,
            inter_coded: false,
            vectors: Vec::new(),
        }
    }

    /// Vector whose block covers pixel `(px, py)` of the current frame.
    pub fn vector_at(&self, px: i32, py: i32) -> Option<&MotionVector> {
        self.vectors.iter().find(|v| {
            px >= v.x && py >= v.y && px < v.x + v.block_w as i32 && py < v.y + v.block_h as i32
        })
    }

    /// Most frequent `(dx, dy)` in the field, ties to the smallest pair.
    pub fn modal_vector(&self) -> Option<(f32, f32)> {
        modal(self.vectors.iter().map(|v| (v.dx, v.dy)))
    }
}

/// Most frequent pair in `items`; ties resolve to the smallest pair by total order.
pub fn modal(items: impl IntoIterator<Item = (f32, f32)>) -> Option<(f32, f32)> {
    let mut counts: Vec<((f32, f32), usize)> = Vec::new();
    for item in items {
        match counts.iter_mut().find(|(k, _)| k.0.total_cmp(&item.0).is_eq() && k.1.total_cmp(&item.1).is_eq()) {
            Some((_, n)) => *n += 1,
            None => counts.push((item, 1)),
        }
    }
    counts
        .into_iter()
        .max_by(|(a, na), (b, nb)| {
            na.cmp(nb)
                .then_with(|| b.0.total_cmp(&a.0))
                .then_with(|| b.1.total_cmp(&a.1))
        })
        .map(|(k, _)| k)
}
