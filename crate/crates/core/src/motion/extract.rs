use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ingest::{sampling_grid, FrameImage, VideoRecord};
use crate::media::{self, CodecMotionVector, Decoder, PictureKind};
use crate::motion::{MotionVector, MotionVectorField, MIN_BLOCK_EXTENT};

/// Builds a unified forward-convention field from libavcodec's side data.
///
/// Backward-predicted entries (future reference) are negated. When a block
/// has both a forward and a backward entry the two are averaged.
pub(crate) fn field_from_codec(
    vectors: &[CodecMotionVector],
    frame_index: usize,
    timestamp_s: f64,
    kind: PictureKind,
    frame_w: u32,
    frame_h: u32,
) -> MotionVectorField {
    // (x, y, w, h) of the current-frame block -> summed offset and count
    let mut blocks: BTreeMap<(i32, i32, u32, u32), (f32, f32, u32)> = BTreeMap::new();
    for mv in vectors {
        let (w, h) = (u32::from(mv.w), u32::from(mv.h));
        if w == 0 || h == 0 || mv.source == 0 {
            continue;
        }
        let x = i32::from(mv.dst_x) - (w / 2) as i32;
        let y = i32::from(mv.dst_y) - (h / 2) as i32;
        let (mut dx, mut dy) = mv.offset();
        if mv.source > 0 {
            dx = -dx;
            dy = -dy;
        }
        let entry = blocks.entry((x, y, w, h)).or_insert((0.0, 0.0, 0));
        entry.0 += dx;
        entry.1 += dy;
        entry.2 += 1;
    }

    let mut out = Vec::with_capacity(blocks.len());
    for ((x, y, w, h), (sx, sy, n)) in blocks {
        // Clip to the frame and drop border remnants narrower than a block.
        let x0 = x.max(0);
        let y0 = y.max(0);
        let x1 = (x + w as i32).min(frame_w as i32);
        let y1 = (y + h as i32).min(frame_h as i32);
        if x1 - x0 < MIN_BLOCK_EXTENT as i32 || y1 - y0 < MIN_BLOCK_EXTENT as i32 {
            continue;
        }
        let n = n as f32;
        out.push(MotionVector {
            x: x0,
            y: y0,
            dx: sx / n,
            dy: sy / n,
            block_w: (x1 - x0) as u32,
            block_h: (y1 - y0) as u32,
        });
    }

    MotionVectorField {
        frame_index,
        timestamp_s,
        frame_w,
        frame_h,
        inter_coded: kind.is_inter(),
        vectors: out,
    }
}

/// Returns one motion field per sampling timestamp, each taken from the
/// inter-coded frame nearest that timestamp.
///
/// Streams without any inter-coded frame produce empty fields (flagged
/// `inter_coded = false`) and a warning. Codecs that do not expose motion
/// vectors are an error.
pub fn extract_motion_vectors(video: &VideoRecord, rate_fps: f64) -> Result<Vec<MotionVectorField>> {
    let decoder = Decoder::open(&video.path, true)?;
    if !media::codec_exports_motion_vectors(decoder.codec()) {
        return Err(Error::NoMotionData {
            path: video.path.clone(),
            codec: decoder.codec().to_string(),
        });
    }
    let duration = match video.duration_s.or_else(|| decoder.declared_duration()) {
        Some(d) => d,
        None => media::probe(&video.path)?.duration_s,
    };
    let grid = sampling_grid(duration, rate_fps)?;
    let (frame_w, frame_h) = decoder.dimensions();

    let mut assigned: Vec<MotionVectorField> = Vec::with_capacity(grid.len());
    // Most recent inter-coded frame seen so far.
    let mut previous: Option<MotionVectorField> = None;
    let mut first_frame: Option<(usize, f64)> = None;

    decoder.for_each_frame(|f| {
        first_frame.get_or_insert((f.index, f.timestamp_s));
        if !f.kind.is_inter() {
            return Ok(());
        }
        let field = field_from_codec(
            &f.motion_vectors(),
            f.index,
            f.timestamp_s,
            f.kind,
            f.width(),
            f.height(),
        );
        if let Some(prev) = previous.take() {
            let midpoint = 0.5 * (prev.timestamp_s + field.timestamp_s);
            while assigned.len() < grid.len() && grid[assigned.len()] <= midpoint {
                let mut chosen = prev.clone();
                chosen.timestamp_s = grid[assigned.len()];
                assigned.push(chosen);
            }
        }
        previous = Some(field);
        Ok(())
    })?;

    match previous {
        Some(last) => {
            while assigned.len() < grid.len() {
                let mut chosen = last.clone();
                chosen.timestamp_s = grid[assigned.len()];
                assigned.push(chosen);
            }
        }
        None => {
            log::warn!(
                "{}: intra-only stream, no inter-frame motion vectors",
                video.path.display()
            );
            let index = first_frame.map(|(i, _)| i).unwrap_or(0);
            assigned = grid
                .iter()
                .map(|&t| MotionVectorField::empty(index, t, frame_w, frame_h))
                .collect();
        }
    }
    Ok(assigned)
}

/// A decoded picture paired with its motion field.
#[derive(Debug, Clone)]
pub struct DecodedMotionFrame {
    pub image: FrameImage,
    pub kind: PictureKind,
    pub field: MotionVectorField,
}

/// Decodes every frame with its motion field; meant for verification and
/// debugging on short clips, since all frames are kept in memory.
pub fn decode_all_with_motion(video: &VideoRecord) -> Result<Vec<DecodedMotionFrame>> {
    let decoder = Decoder::open(&video.path, true)?;
    let mut frames = Vec::new();
    decoder.for_each_frame(|mut f| {
        let field = field_from_codec(
            &f.motion_vectors(),
            f.index,
            f.timestamp_s,
            f.kind,
            f.width(),
            f.height(),
        );
        frames.push(DecodedMotionFrame {
            image: f.to_image()?,
            kind: f.kind,
            field,
        });
        Ok(())
    })?;
    Ok(frames)
}
