//! Manifest loading, frame sampling and static-stream preprocessing.

mod frame;
mod manifest;
mod preprocess;

pub use frame::{FrameImage, InputTensor, Normalization, CHANNELS, INPUT_SIDE};
pub use manifest::{load_manifest, parse_manifest, write_manifest, Split, VideoRecord};
pub use preprocess::{plan_resize, preprocess_frame, resize_and_crop, ResizePlan, RgbImageF32};
pub(crate) use preprocess::to_tensor;

use crate::error::{Error, Result};
use crate::media::{self, Decoder};

/// Slack used when comparing decoder timestamps against grid points.
pub(crate) const TIMESTAMP_EPS: f64 = 1e-3;

/// Fills `duration_s` from the container and checks the file decodes.
pub fn probe_record(record: &mut VideoRecord) -> Result<media::VideoInfo> {
    let info = media::probe(&record.path)?;
    record.duration_s = Some(info.duration_s);
    Ok(info)
}

/// Sampling timestamps `0, 1/rate, 2/rate, … < duration`, never empty.
pub fn sampling_grid(duration_s: f64, rate_fps: f64) -> Result<Vec<f64>> {
    if !(rate_fps > 0.0 && rate_fps.is_finite()) {
        return Err(Error::InvalidInput(format!("sampling rate must be positive, got {rate_fps}")));
    }
    let duration_s = if duration_s.is_finite() { duration_s.max(0.0) } else { 0.0 };
    let n = ((duration_s * rate_fps - 1e-9).ceil() as usize).max(1);
    Ok((0..n).map(|k| k as f64 / rate_fps).collect())
}

/// Decodes `video` and returns one frame per grid timestamp. Each grid point
/// takes the first decoded frame presented at or after it; grid points past
/// the last decoded frame repeat the most recent sample.
pub fn sample_frames(video: &VideoRecord, rate_fps: f64) -> Result<Vec<FrameImage>> {
    let duration = match video.duration_s {
        Some(d) => d,
        None => media::probe(&video.path)?.duration_s,
    };
    let grid = sampling_grid(duration, rate_fps)?;
    let decoder = Decoder::open(&video.path, false)?;

    let mut out: Vec<FrameImage> = Vec::with_capacity(grid.len());
    decoder.for_each_frame(|mut f| {
        let due = grid[out.len()..]
            .iter()
            .take_while(|&&t| t <= f.timestamp_s + TIMESTAMP_EPS)
            .count();
        if due > 0 {
            let img = f.to_image()?;
            for _ in 0..due {
                let mut copy = img.clone();
                copy.timestamp_s = grid[out.len()];
                out.push(copy);
            }
        }
        Ok(())
    })?;

    // The first decoded frame always covers t = 0, so `out` is nonempty here.
    while out.len() < grid.len() {
        let mut copy = out.last().expect("first frame covers t = 0").clone();
        copy.timestamp_s = grid[out.len()];
        out.push(copy);
    }
    Ok(out)
}
