//! Thin layer over libavformat/libavcodec: probing containers, decoding frames
//! in presentation order, RGB conversion and motion-vector side data.

use std::path::{Path, PathBuf};
use std::sync::Once;

use ffmpeg_next as ffmpeg;
use ffmpeg::codec::Id as CodecId;
use ffmpeg::format::Pixel;
use ffmpeg::software::scaling::{context::Context as Scaler, flag::Flags};
use ffmpeg::util::frame::video::Video as AvFrame;
use ffmpeg::util::picture;

use crate::error::{Error, Result};
use crate::ingest::FrameImage;

static INIT: Once = Once::new();

/// Initializes libav once per process and silences its stderr chatter.
pub fn init() {
    INIT.call_once(|| {
        ffmpeg::init().expect("libav initialization failed");
        ffmpeg::util::log::set_level(ffmpeg::util::log::Level::Fatal);
    });
}

/// Consecutive demuxer errors tolerated before giving up on a file.
const MAX_READ_ERRORS: usize = 64;

/// Container and stream facts gathered without decoding the whole file.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoInfo {
    pub duration_s: f64,
    pub width: u32,
    pub height: u32,
    pub codec: String,
    pub frame_rate: Option<f64>,
}

impl VideoInfo {
    /// Whether libavcodec can export per-macroblock motion vectors for this codec.
    pub fn exports_motion_vectors(&self) -> bool {
        codec_exports_motion_vectors(&self.codec)
    }
}

/// Codecs whose libavcodec decoders honor `flags2=+export_mvs`.
const MV_CODECS: &[CodecId] = &[
    CodecId::H264,
    CodecId::MPEG1VIDEO,
    CodecId::MPEG2VIDEO,
    CodecId::MPEG4,
    CodecId::H263,
    CodecId::H263P,
    CodecId::H263I,
    CodecId::FLV1,
    CodecId::MSMPEG4V1,
    CodecId::MSMPEG4V2,
    CodecId::MSMPEG4V3,
    CodecId::WMV1,
    CodecId::WMV2,
];

fn codec_name(id: CodecId) -> String {
    format!("{id:?}").to_lowercase()
}

pub(crate) fn codec_exports_motion_vectors(name: &str) -> bool {
    MV_CODECS.iter().any(|&id| codec_name(id) == name)
}

/// Coarse picture type of a decoded frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PictureKind {
    Intra,
    Predicted,
    Bidirectional,
    Other,
}

impl PictureKind {
    pub fn is_inter(self) -> bool {
        matches!(self, PictureKind::Predicted | PictureKind::Bidirectional)
    }

    fn from_av(kind: picture::Type) -> Self {
        match kind {
            picture::Type::I | picture::Type::SI | picture::Type::BI => PictureKind::Intra,
            picture::Type::P | picture::Type::SP | picture::Type::S => PictureKind::Predicted,
            picture::Type::B => PictureKind::Bidirectional,
            picture::Type::None => PictureKind::Other,
        }
    }
}

/// One entry of libavcodec's motion-vector side data, copied out of the frame.
///
/// `src_*`/`dst_*` are block centers in the reference and current picture.
/// `source` is negative for a past reference and positive for a future one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecMotionVector {
    pub source: i32,
    pub w: u8,
    pub h: u8,
    pub src_x: i16,
    pub src_y: i16,
    pub dst_x: i16,
    pub dst_y: i16,
    pub motion_x: i32,
    pub motion_y: i32,
    pub motion_scale: u16,
}

impl CodecMotionVector {
    /// Sub-pixel accurate displacement from the reference block to the current one.
    pub fn offset(&self) -> (f32, f32) {
        if self.motion_scale == 0 {
            return (
                f32::from(self.dst_x - self.src_x),
                f32::from(self.dst_y - self.src_y),
            );
        }
        let scale = f32::from(self.motion_scale);
        // motion_x points from the current block into the reference.
        (
            -(self.motion_x as f32) / scale,
            -(self.motion_y as f32) / scale,
        )
    }
}

/// A frame handed to [`Decoder::for_each_frame`] callbacks.
pub struct DecodedFrame<'a> {
    pub index: usize,
    pub timestamp_s: f64,
    pub kind: PictureKind,
    frame: &'a AvFrame,
    rgb: &'a mut RgbConverter,
}

impl DecodedFrame<'_> {
    pub fn width(&self) -> u32 {
        self.frame.width()
    }

    pub fn height(&self) -> u32 {
        self.frame.height()
    }

    pub fn to_image(&mut self) -> Result<FrameImage> {
        self.rgb.convert(self.frame, self.timestamp_s)
    }

    pub fn motion_vectors(&self) -> Vec<CodecMotionVector> {
        motion_vectors_of(self.frame)
    }
}

fn motion_vectors_of(frame: &AvFrame) -> Vec<CodecMotionVector> {
    use ffmpeg::util::frame::side_data::Type;
    let Some(side) = frame.side_data(Type::MotionVectors) else {
        return Vec::new();
    };
    let bytes = side.data();
    let stride = std::mem::size_of::<ffmpeg::ffi::AVMotionVector>();
    bytes
        .chunks_exact(stride)
        .map(|chunk| {
            // SAFETY: side data of this type is a packed array of AVMotionVector;
            // read_unaligned copes with the byte buffer's alignment.
            let mv: ffmpeg::ffi::AVMotionVector =
                unsafe { std::ptr::read_unaligned(chunk.as_ptr().cast()) };
            CodecMotionVector {
                source: mv.source,
                w: mv.w,
                h: mv.h,
                src_x: mv.src_x,
                src_y: mv.src_y,
                dst_x: mv.dst_x,
                dst_y: mv.dst_y,
                motion_x: mv.motion_x,
                motion_y: mv.motion_y,
                motion_scale: mv.motion_scale,
            }
        })
        .collect()
}

/// Lazily created swscale context converting decoder output to packed RGB24.
pub(crate) struct RgbConverter {
    scaler: Option<(Scaler, Pixel, u32, u32)>,
    path: PathBuf,
}

impl RgbConverter {
    fn new(path: &Path) -> Self {
        RgbConverter {
            scaler: None,
            path: path.to_path_buf(),
        }
    }

    fn convert(&mut self, frame: &AvFrame, timestamp_s: f64) -> Result<FrameImage> {
        let (fmt, w, h) = (frame.format(), frame.width(), frame.height());
        let stale = match &self.scaler {
            Some((_, f, sw, sh)) => (*f, *sw, *sh) != (fmt, w, h),
            None => true,
        };
        if stale {
            let scaler = Scaler::get(fmt, w, h, Pixel::RGB24, w, h, Flags::BILINEAR)
                .map_err(|e| self.decode_error(format!("no RGB conversion from {fmt:?}: {e}")))?;
            self.scaler = Some((scaler, fmt, w, h));
        }
        let (scaler, ..) = self.scaler.as_mut().expect("scaler initialized above");
        let mut rgb = AvFrame::empty();
        scaler
            .run(frame, &mut rgb)
            .map_err(|e| Error::Decode {
                path: self.path.clone(),
                message: format!("RGB conversion failed: {e}"),
            })?;
        let stride = rgb.stride(0);
        let row = w as usize * 3;
        let data = rgb.data(0);
        let mut pixels = Vec::with_capacity(row * h as usize);
        for y in 0..h as usize {
            pixels.extend_from_slice(&data[y * stride..y * stride + row]);
        }
        FrameImage::new(w, h, pixels, timestamp_s)
    }

    fn decode_error(&self, message: String) -> Error {
        Error::Decode {
            path: self.path.clone(),
            message,
        }
    }
}

/// Sequential decoder over the best video stream of a container.
pub struct Decoder {
    path: PathBuf,
    input: ffmpeg::format::context::Input,
    decoder: ffmpeg::decoder::Video,
    stream_index: usize,
    time_base: f64,
    start_s: f64,
    fallback_fps: f64,
    codec: String,
}

impl Decoder {
    /// Opens `path`; with `export_mvs` the decoder attaches motion-vector side data.
    pub fn open(path: &Path, export_mvs: bool) -> Result<Self> {
        init();
        let err = |message: String| Error::Decode {
            path: path.to_path_buf(),
            message,
        };
        if !path.is_file() {
            return Err(err("file does not exist".into()));
        }
        let input = ffmpeg::format::input(&path).map_err(|e| err(format!("cannot open container: {e}")))?;
        let stream = input
            .streams()
            .best(ffmpeg::media::Type::Video)
            .ok_or_else(|| err("no video stream".into()))?;
        let stream_index = stream.index();
        let tb = stream.time_base();
        let time_base = if tb.denominator() != 0 {
            f64::from(tb.numerator()) / f64::from(tb.denominator())
        } else {
            0.0
        };
        let start_s = if stream.start_time() != ffmpeg::ffi::AV_NOPTS_VALUE {
            stream.start_time() as f64 * time_base
        } else {
            0.0
        };
        let fallback_fps = rational_to_f64(stream.avg_frame_rate())
            .or_else(|| rational_to_f64(stream.rate()))
            .unwrap_or(25.0);
        let ctx = stream.codec();
        let codec_id = ctx.id();
        let codec = codec_name(codec_id);
        let decoder_codec =
            ffmpeg::decoder::find(codec_id).ok_or_else(|| err(format!("no decoder for codec {codec}")))?;
        let mut opts = ffmpeg::Dictionary::new();
        if export_mvs {
            opts.set("flags2", "+export_mvs");
        }
        let decoder = ctx
            .decoder()
            .open_as_with(decoder_codec, opts)
            .and_then(|opened| opened.video())
            .map_err(|e| err(format!("cannot open {codec} decoder: {e}")))?;
        Ok(Decoder {
            path: path.to_path_buf(),
            input,
            decoder,
            stream_index,
            time_base,
            start_s,
            fallback_fps,
            codec,
        })
    }

    pub fn codec(&self) -> &str {
        &self.codec
    }

    pub fn frame_rate(&self) -> f64 {
        self.fallback_fps
    }

    /// Container-level duration in seconds, when the demuxer knows it.
    pub fn declared_duration(&self) -> Option<f64> {
        let stream = self.input.stream(self.stream_index)?;
        if stream.duration() > 0 && self.time_base > 0.0 {
            return Some(stream.duration() as f64 * self.time_base);
        }
        let d = self.input.duration();
        (d > 0).then(|| d as f64 / f64::from(ffmpeg::ffi::AV_TIME_BASE))
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.decoder.width(), self.decoder.height())
    }

    /// Decodes every frame in presentation order and hands it to `on_frame`.
    /// Returns the number of decoded frames; zero frames is a decode error.
    pub fn for_each_frame<F>(mut self, mut on_frame: F) -> Result<usize>
    where
        F: FnMut(DecodedFrame<'_>) -> Result<()>,
    {
        let mut rgb = RgbConverter::new(&self.path);
        let mut count = 0usize;
        let mut read_errors = 0usize;
        let mut packet = ffmpeg::Packet::empty();
        loop {
            match packet.read(&mut self.input) {
                Ok(()) => read_errors = 0,
                Err(ffmpeg::Error::Eof) => break,
                Err(e) => {
                    read_errors += 1;
                    if read_errors > MAX_READ_ERRORS {
                        log::warn!("{}: giving up after repeated read errors: {e}", self.path.display());
                        break;
                    }
                    continue;
                }
            }
            if packet.stream() != self.stream_index {
                continue;
            }
            if let Err(e) = self.decoder.send_packet(&packet) {
                log::debug!("{}: dropping undecodable packet: {e}", self.path.display());
                continue;
            }
            count = self.drain(count, &mut rgb, &mut on_frame)?;
        }
        if self.decoder.send_eof().is_ok() {
            count = self.drain(count, &mut rgb, &mut on_frame)?;
        }
        if count == 0 {
            return Err(Error::Decode {
                path: self.path.clone(),
                message: "no decodable video frames".into(),
            });
        }
        Ok(count)
    }

    fn drain<F>(&mut self, mut count: usize, rgb: &mut RgbConverter, on_frame: &mut F) -> Result<usize>
    where
        F: FnMut(DecodedFrame<'_>) -> Result<()>,
    {
        let mut frame = AvFrame::empty();
        while self.decoder.receive_frame(&mut frame).is_ok() {
            let timestamp_s = match frame.timestamp() {
                Some(ts) if self.time_base > 0.0 => (ts as f64 * self.time_base - self.start_s).max(0.0),
                _ => count as f64 / self.fallback_fps,
            };
            on_frame(DecodedFrame {
                index: count,
                timestamp_s,
                kind: PictureKind::from_av(frame.kind()),
                frame: &frame,
                rgb,
            })?;
            count += 1;
        }
        Ok(count)
    }
}

fn rational_to_f64(r: ffmpeg::Rational) -> Option<f64> {
    (r.numerator() > 0 && r.denominator() > 0).then(|| f64::from(r.numerator()) / f64::from(r.denominator()))
}

/// Reads container metadata. Falls back to a full decode when the container
/// does not declare a duration.
pub fn probe(path: &Path) -> Result<VideoInfo> {
    let decoder = Decoder::open(path, false)?;
    let (width, height) = decoder.dimensions();
    if width == 0 || height == 0 {
        return Err(Error::Decode {
            path: path.to_path_buf(),
            message: "video stream has zero size".into(),
        });
    }
    let codec = decoder.codec().to_string();
    let fps = decoder.frame_rate();
    let frame_rate = Some(fps);
    let duration_s = match decoder.declared_duration() {
        Some(d) => d,
        None => {
            let mut last = 0.0f64;
            decoder.for_each_frame(|f| {
                last = last.max(f.timestamp_s);
                Ok(())
            })?;
            last + 1.0 / fps
        }
    };
    Ok(VideoInfo {
        duration_s,
        width,
        height,
        codec,
        frame_rate,
    })
}
