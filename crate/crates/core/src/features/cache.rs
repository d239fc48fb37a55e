//! On-disk feature cache.
//!
//! One file per (video, stream) under `{cache_dir}/{descriptor}-{digest16}/`:
//! magic `EFV1`, `u32` dim, `u32` n_frames, `n_frames × dim` f32 (frame-major),
//! then `dim` f32 pooled values, all little-endian.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::pool::{FeatureVector, PooledFeature};
use crate::Stream;

const MAGIC: &[u8; 4] = b"EFV1";
const HEADER_LEN: usize = 12;
const NO_MOTION_SUFFIX: &str = "nomotion";

/// Decoded contents of one cache file.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedFeatures {
    pub dim: usize,
    pub frames: Vec<Vec<f32>>,
    pub pooled: Vec<f32>,
}

impl CachedFeatures {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn to_pooled(&self, video_id: &str, stream: Stream) -> PooledFeature {
        PooledFeature {
            video_id: video_id.to_string(),
            values: self.pooled.clone(),
            source_stream: stream,
            n_frames: self.frames.len(),
        }
    }
}

pub fn encode(frames: &[FeatureVector], pooled: &PooledFeature) -> Result<Vec<u8>> {
    let dim = pooled.dim();
    if let Some(f) = frames.iter().find(|f| f.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: f.dim() });
    }
    let too_big = |what: &str| Error::InvalidInput(format!("{what} does not fit in u32"));
    let dim32 = u32::try_from(dim).map_err(|_| too_big("dim"))?;
    let n32 = u32::try_from(frames.len()).map_err(|_| too_big("n_frames"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * dim * (frames.len() + 1));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&dim32.to_le_bytes());
    out.extend_from_slice(&n32.to_le_bytes());
    for v in frames.iter().flat_map(|f| &f.values).chain(&pooled.values) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> std::result::Result<CachedFeatures, String> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err("not an EFV1 file".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (dim, n) = (word(4), word(8));
    if dim == 0 {
        return Err("zero dimension".into());
    }
    let expected = n
        .checked_add(1)
        .and_then(|rows| rows.checked_mul(dim))
        .and_then(|len| len.checked_mul(4))
        .and_then(|len| len.checked_add(HEADER_LEN))
        .ok_or("size overflow")?;
    if bytes.len() != expected {
        return Err(format!("expected {expected} bytes, found {}", bytes.len()));
    }
    let floats: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    let mut rows: Vec<Vec<f32>> = floats.chunks_exact(dim).map(<[f32]>::to_vec).collect();
    let pooled = rows.pop().expect("at least the pooled row");
    Ok(CachedFeatures { dim, frames: rows, pooled })
}

/// Filesystem-safe form of a video id. Ids that need rewriting get a hash
/// suffix so distinct ids never share a file.
pub fn sanitize_id(id: &str) -> String {
    let clean: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if clean == id && !clean.is_empty() {
        clean
    } else {
        let digest = Sha256::digest(id.as_bytes());
        format!("{clean}~{}", &hex::encode(digest)[..8])
    }
}

/// Cache namespace for one descriptor and weights file.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn new(cache_dir: &Path, descriptor_name: &str, weights_digest: &str) -> Self {
        let short = &weights_digest[..weights_digest.len().min(16)];
        FeatureCache {
            dir: cache_dir.join(format!("{}-{short}", sanitize_id(descriptor_name))),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, video_id: &str, stream: Stream) -> PathBuf {
        self.dir.join(format!("{}.{stream}.efv", sanitize_id(video_id)))
    }

    fn no_motion_path(&self, video_id: &str) -> PathBuf {
        self.dir.join(format!("{}.{NO_MOTION_SUFFIX}", sanitize_id(video_id)))
    }

    /// `Ok(None)` on a miss. Unreadable or malformed entries are errors.
    pub fn load(&self, video_id: &str, stream: Stream) -> Result<Option<CachedFeatures>> {
        let path = self.path(video_id, stream);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(format!("reading {}", path.display()), e)),
        };
        decode(&bytes)
            .map(Some)
            .map_err(|message| Error::Cache { path, message })
    }

    pub fn contains(&self, video_id: &str, stream: Stream) -> bool {
        self.path(video_id, stream).is_file()
    }

    pub fn store(&self, video_id: &str, frames: &[FeatureVector], pooled: &PooledFeature) -> Result<PathBuf> {
        let path = self.path(video_id, pooled.source_stream);
        self.write_atomic(&path, &encode(frames, pooled)?)?;
        Ok(path)
    }

    /// Records that a video has no usable motion stream.
    pub fn mark_no_motion(&self, video_id: &str, reason: &str) -> Result<()> {
        self.write_atomic(&self.no_motion_path(video_id), reason.as_bytes())
    }

    pub fn no_motion_reason(&self, video_id: &str) -> Option<String> {
        fs::read_to_string(self.no_motion_path(video_id)).ok()
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        let cache_err = |e: std::io::Error| Error::Cache {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        fs::create_dir_all(&self.dir).map_err(cache_err)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(cache_err)?;
        tmp.write_all(bytes).map_err(cache_err)?;
        tmp.persist(path).map_err(|e| cache_err(e.error))?;
        Ok(())
    }
}
