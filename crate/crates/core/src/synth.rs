//! Synthetic test videos: a pseudo-random blocky texture translated by a
//! fixed offset every frame, encoded with a real codec.

use std::path::{Path, PathBuf};

use ffmpeg_next as ffmpeg;
use ffmpeg::format::Pixel;
use ffmpeg::software::scaling::{context::Context as Scaler, flag::Flags};
use ffmpeg::util::frame::video::Video as AvFrame;
use ffmpeg::{codec, encoder, format, Dictionary, Packet, Rational};

use crate::error::{Error, Result};
use crate::ingest::{write_manifest, FrameImage, Split, VideoRecord};
use crate::media;
use crate::Label;

/// Side of the square texture cells, in pixels.
const CELL: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthCodec {
    /// MPEG-4 Part 2; exports motion vectors.
    Mpeg4,
    /// Motion JPEG; intra-only and without motion vectors.
    Mjpeg,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub width: u32,
    pub height: u32,
    pub fps: u32,
    pub n_frames: u32,
    /// Content displacement per frame, in pixels.
    pub shift: (i32, i32),
    pub texture_seed: u64,
    /// Color mixed into the texture at one quarter strength.
    pub tint: [u8; 3],
    /// Keyframe interval; 1 makes every frame intra-coded.
    pub gop: u32,
    pub codec: SynthCodec,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            width: 160,
            height: 128,
            fps: 10,
            n_frames: 20,
            shift: (0, 0),
            texture_seed: 1,
            tint: [128, 128, 128],
            gop: 250,
            codec: SynthCodec::Mpeg4,
        }
    }
}

fn texel(seed: u64, cx: i32, cy: i32) -> u8 {
    // splitmix64 over the cell coordinates
    let mut z = seed
        .wrapping_add((cx as u32 as u64) << 32 | cy as u32 as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (z ^ (z >> 31)) as u8
}

impl SynthSpec {
    pub fn duration_s(&self) -> f64 {
        f64::from(self.n_frames) / f64::from(self.fps)
    }

    /// Frame `n` exactly as fed to the encoder.
    pub fn render(&self, n: u32) -> FrameImage {
        let (ox, oy) = (self.shift.0 * n as i32, self.shift.1 * n as i32);
        let mut pixels = Vec::with_capacity((self.width * self.height * 3) as usize);
        for y in 0..self.height as i32 {
            for x in 0..self.width as i32 {
                let v = u32::from(texel(self.texture_seed, (x - ox).div_euclid(CELL), (y - oy).div_euclid(CELL)));
                for &t in &self.tint {
                    pixels.push(((v * 3 + u32::from(t)) / 4) as u8);
                }
            }
        }
        FrameImage::new(self.width, self.height, pixels, f64::from(n) / f64::from(self.fps))
            .expect("buffer sized from the spec")
    }

    /// Encodes the clip into `path`; the container follows the file extension
    /// (`.avi` works for both codecs).
    pub fn write(&self, path: &Path) -> Result<()> {
        media::init();
        let err = |message: String| Error::Encode {
            path: path.to_path_buf(),
            message,
        };
        if self.width < 16 || self.height < 16 || self.width % 2 == 1 || self.height % 2 == 1 {
            return Err(err(format!("unsupported size {}x{}", self.width, self.height)));
        }
        if self.fps == 0 || self.n_frames == 0 || self.gop == 0 {
            return Err(err("fps, n_frames and gop must be positive".into()));
        }
        let (id, pix) = match self.codec {
            SynthCodec::Mpeg4 => (codec::Id::MPEG4, Pixel::YUV420P),
            SynthCodec::Mjpeg => (codec::Id::MJPEG, Pixel::YUVJ420P),
        };
        let found = encoder::find(id).ok_or_else(|| err(format!("no {id:?} encoder in this libavcodec")))?;
        let tb = Rational(1, self.fps as i32);
        let mut octx = format::output(&path).map_err(|e| err(e.to_string()))?;
        let global = octx.format().flags().contains(format::Flags::GLOBAL_HEADER);
        let mut ost = octx.add_stream(found).map_err(|e| err(e.to_string()))?;
        let mut enc = ost
            .codec()
            .encoder()
            .video()
            .map_err(|e| err(e.to_string()))?;
        enc.set_width(self.width);
        enc.set_height(self.height);
        enc.set_format(pix);
        enc.set_time_base(tb);
        enc.set_frame_rate(Some(Rational(self.fps as i32, 1)));
        enc.set_gop(self.gop);
        enc.set_max_b_frames(0);
        if global {
            enc.set_flags(codec::Flags::GLOBAL_HEADER);
        }
        let mut opts = Dictionary::new();
        opts.set("qscale", "2");
        let mut enc = enc.open_as_with(found, opts).map_err(|e| err(e.to_string()))?;
        ost.set_parameters(&enc);
        ost.set_time_base(tb);
        octx.write_header().map_err(|e| err(e.to_string()))?;
        let stream_tb = octx.stream(0).expect("stream added above").time_base();

        let mut scaler = Scaler::get(Pixel::RGB24, self.width, self.height, pix, self.width, self.height, Flags::BILINEAR)
            .map_err(|e| err(e.to_string()))?;
        let flush = |enc: &mut encoder::Video, octx: &mut format::context::Output| -> Result<()> {
            let mut pkt = Packet::empty();
            while enc.receive_packet(&mut pkt).is_ok() {
                pkt.set_stream(0);
                pkt.rescale_ts(tb, stream_tb);
                pkt.write_interleaved(octx).map_err(|e| err(e.to_string()))?;
            }
            Ok(())
        };
        for n in 0..self.n_frames {
            let img = self.render(n);
            let mut rgb = AvFrame::new(Pixel::RGB24, self.width, self.height);
            let stride = rgb.stride(0);
            let row = self.width as usize * 3;
            let data = rgb.data_mut(0);
            for (y, src) in img.pixels().chunks_exact(row).enumerate() {
                data[y * stride..y * stride + row].copy_from_slice(src);
            }
            let mut yuv = AvFrame::empty();
            scaler.run(&rgb, &mut yuv).map_err(|e| err(e.to_string()))?;
            yuv.set_pts(Some(i64::from(n)));
            enc.send_frame(&yuv).map_err(|e| err(e.to_string()))?;
            flush(&mut enc, &mut octx)?;
        }
        enc.send_eof().map_err(|e| err(e.to_string()))?;
        flush(&mut enc, &mut octx)?;
        octx.write_trailer().map_err(|e| err(e.to_string()))?;
        Ok(())
    }
}

/// Class-dependent look and motion for generated datasets.
pub fn class_spec(label: Label, index: usize, seed: u64) -> SynthSpec {
    let (tint, shift) = match label {
        Label::Sensitive => ([230, 40, 60], (4, 0)),
        Label::NonSensitive => ([40, 90, 220], (0, -4)),
    };
    SynthSpec {
        width: 96,
        height: 64,
        fps: 10,
        n_frames: 25,
        shift,
        texture_seed: seed.wrapping_mul(1_000_003).wrapping_add(index as u64),
        tint,
        ..SynthSpec::default()
    }
}

/// Writes `n_per_class` videos of each class plus `manifest.jsonl` into `dir`.
pub fn generate_dataset(dir: &Path, n_per_class: usize, seed: u64) -> Result<(PathBuf, Vec<VideoRecord>)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut records = Vec::with_capacity(2 * n_per_class);
    for label in [Label::Sensitive, Label::NonSensitive] {
        for i in 0..n_per_class {
            let id = format!("{}-{i:03}", if label.is_positive() { "pos" } else { "neg" });
            let path = dir.join(format!("{id}.avi"));
            class_spec(label, records.len(), seed).write(&path)?;
            records.push(VideoRecord::new(id, path, label).with_split(Split::Unassigned));
        }
    }
    let manifest = dir.join("manifest.jsonl");
    write_manifest(&manifest, &records)?;
    Ok((manifest, records))
}
