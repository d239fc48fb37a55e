//! Exhaustive block matching, used to verify codec-extracted vectors.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{FrameImage, CHANNELS};
use crate::motion::{MotionVector, MotionVectorField};

/// Full-search SAD block matching of `cur` against `ref_frame`.
///
/// Every complete `block`×`block` tile of `cur` is compared with all reference
/// blocks displaced by up to `search_radius` pixels per axis that lie fully
/// inside the frame. SAD is summed over the three color channels. Ties go to
/// the smallest `|dx| + |dy|`, then the smallest `dy`, then the smallest `dx`.
/// Trailing partial tiles are skipped.
pub fn estimate_motion_exhaustive(
    ref_frame: &FrameImage,
    cur: &FrameImage,
    block: u32,
    search_radius: u32,
) -> Result<MotionVectorField> {
    if (ref_frame.width(), ref_frame.height()) != (cur.width(), cur.height()) {
        return Err(Error::InvalidInput(format!(
            "reference is {}x{}, current is {}x{}",
            ref_frame.width(),
            ref_frame.height(),
            cur.width(),
            cur.height()
        )));
    }
    if block == 0 {
        return Err(Error::InvalidInput("block size must be positive".into()));
    }
    let (w, h) = (cur.width() as i32, cur.height() as i32);
    let b = block as i32;
    let r = search_radius as i32;

    let origins: Vec<(i32, i32)> = (0..h / b)
        .flat_map(|by| (0..w / b).map(move |bx| (bx * b, by * b)))
        .collect();

    // Candidates pre-sorted by the tie-break order so the first minimum wins.
    let mut candidates: Vec<(i32, i32)> = (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy))).collect();
    candidates.sort_by_key(|&(dx, dy)| (dx.abs() + dy.abs(), dy, dx));

    let vectors = origins
        .par_iter()
        .map(|&(x, y)| {
            let mut best: Option<(u64, i32, i32)> = None;
            for &(dx, dy) in &candidates {
                let (rx, ry) = (x - dx, y - dy);
                if rx < 0 || ry < 0 || rx + b > w || ry + b > h {
                    continue;
                }
                let limit = best.map_or(u64::MAX, |(s, ..)| s);
                let sad = block_sad(ref_frame, cur, (rx, ry), (x, y), b, limit);
                if sad < limit {
                    best = Some((sad, dx, dy));
                }
            }
            // The zero displacement is always admissible, so `best` is set.
            let (_, dx, dy) = best.expect("zero displacement is always inside the frame");
            MotionVector {
                x,
                y,
                dx: dx as f32,
                dy: dy as f32,
                block_w: block,
                block_h: block,
            }
        })
        .collect();

    Ok(MotionVectorField {
        frame_index: 0,
        timestamp_s: cur.timestamp_s,
        frame_w: cur.width(),
        frame_h: cur.height(),
        inter_coded: true,
        vectors,
    })
}

/// SAD between two blocks; stops early once the running sum reaches `limit`.
fn block_sad(a: &FrameImage, b: &FrameImage, pa: (i32, i32), pb: (i32, i32), size: i32, limit: u64) -> u64 {
    let stride = a.width() as usize * CHANNELS;
    let row_len = size as usize * CHANNELS;
    let (pa_x, pa_y) = (pa.0 as usize, pa.1 as usize);
    let (pb_x, pb_y) = (pb.0 as usize, pb.1 as usize);
    let mut sum = 0u64;
    for row in 0..size as usize {
        let ia = (pa_y + row) * stride + pa_x * CHANNELS;
        let ib = (pb_y + row) * stride + pb_x * CHANNELS;
        let ra = &a.pixels()[ia..ia + row_len];
        let rb = &b.pixels()[ib..ib + row_len];
        sum += ra
            .iter()
            .zip(rb)
            .map(|(&p, &q)| u64::from(p.abs_diff(q)))
            .sum::<u64>();
        if sum >= limit {
            return sum;
        }
    }
    sum
}
