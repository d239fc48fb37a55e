use std::fmt;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{pool_features, FeatureExtractor};
use crate::ingest::{preprocess_frame, probe_record, sample_frames, InputTensor, VideoRecord};
use crate::motion::{extract_motion_vectors, rasterize_field, save_field_png};
use crate::pipeline::Pipeline;
use crate::Stream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VideoFailure {
    pub id: String,
    pub reason: String,
}

/// Outcome of populating the feature cache.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ExtractSummary {
    pub ok: Vec<String>,
    pub failed: Vec<VideoFailure>,
    /// Videos whose motion stream is unavailable, with the reason.
    pub no_motion: Vec<VideoFailure>,
    /// Videos served entirely from the cache.
    pub cache_hits: usize,
    pub inference_calls: u64,
}

impl fmt::Display for ExtractSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ok, {} failed", self.ok.len(), self.failed.len())
    }
}

enum Outcome {
    Hit,
    Computed,
}

struct Extractors {
    static_stream: FeatureExtractor,
    motion_stream: FeatureExtractor,
}

impl Pipeline {
    fn is_cached(&self, id: &str) -> bool {
        self.static_cache.contains(id, Stream::Static)
            && (self.motion_cache.contains(id, Stream::Motion) || self.motion_cache.no_motion_reason(id).is_some())
    }

    /// Fills the cache for every record. Videos already cached are not
    /// decoded, and the networks are loaded only if some video needs them.
    pub fn extract(&self, records: &[VideoRecord], dump_motion: Option<&Path>) -> Result<ExtractSummary> {
        let pending = records.iter().filter(|r| !self.is_cached(&r.id)).count();
        let extractors = if pending > 0 || dump_motion.is_some() {
            info!("{pending} of {} videos need feature extraction", records.len());
            Some(Extractors {
                static_stream: FeatureExtractor::load(&self.static_desc)?,
                motion_stream: FeatureExtractor::load(&self.motion_desc)?,
            })
        } else {
            None
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        let results: Vec<Result<Outcome>> = pool.install(|| {
            records
                .par_iter()
                .map(|r| self.extract_one(r, extractors.as_ref(), dump_motion))
                .collect()
        });
        let mut summary = ExtractSummary::default();
        for (r, res) in records.iter().zip(results) {
            match res {
                Ok(outcome) => {
                    if matches!(outcome, Outcome::Hit) {
                        summary.cache_hits += 1;
                    }
                    if let Some(reason) = self.motion_cache.no_motion_reason(&r.id) {
                        summary.no_motion.push(VideoFailure {
                            id: r.id.clone(),
                            reason,
                        });
                    }
                    summary.ok.push(r.id.clone());
                }
                Err(e) => {
                    warn!("{}: {e}", r.id);
                    summary.failed.push(VideoFailure {
                        id: r.id.clone(),
                        reason: e.to_string(),
                    });
                }
            }
        }
        if let Some(x) = &extractors {
            summary.inference_calls = x.static_stream.inference_calls() + x.motion_stream.inference_calls();
        }
        Ok(summary)
    }

    fn extract_one(&self, record: &VideoRecord, ex: Option<&Extractors>, dump_motion: Option<&Path>) -> Result<Outcome> {
        if self.is_cached(&record.id) && dump_motion.is_none() {
            return Ok(Outcome::Hit);
        }
        let ex = ex.expect("extractors are loaded whenever a video misses the cache");
        let mut record = record.clone();
        probe_record(&mut record)?;
        let rate = self.config.sampling_fps;

        if !self.static_cache.contains(&record.id, Stream::Static) {
            let norm = self.static_desc.normalization();
            let tensors = sample_frames(&record, rate)?
                .iter()
                .map(|f| preprocess_frame(f, &norm))
                .collect::<Result<Vec<InputTensor>>>()?;
            store(&self.static_cache, &record.id, &ex.static_stream, &tensors)?;
        }

        let motion_done = self.motion_cache.contains(&record.id, Stream::Motion)
            || self.motion_cache.no_motion_reason(&record.id).is_some();
        if motion_done && dump_motion.is_none() {
            return Ok(Outcome::Computed);
        }
        let fields = match extract_motion_vectors(&record, rate) {
            Ok(fields) => fields,
            Err(e @ Error::NoMotionData { .. }) => {
                warn!("{}: {e}", record.id);
                self.motion_cache.mark_no_motion(&record.id, &e.to_string())?;
                return Ok(Outcome::Computed);
            }
            Err(e) => return Err(e),
        };
        if let Some(dir) = dump_motion {
            let dir = dir.join(crate::features::cache::sanitize_id(&record.id));
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
            for (k, field) in fields.iter().enumerate() {
                save_field_png(field, &dir.join(format!("{k:04}.png")))?;
            }
        }
        if motion_done {
            return Ok(Outcome::Computed);
        }
        if fields.iter().all(|f| !f.inter_coded) {
            self.motion_cache
                .mark_no_motion(&record.id, "intra-only stream: no inter-frame motion vectors")?;
            return Ok(Outcome::Computed);
        }
        let norm = self.motion_desc.normalization();
        let tensors = fields
            .iter()
            .map(|f| rasterize_field(f, &norm))
            .collect::<Result<Vec<InputTensor>>>()?;
        store(&self.motion_cache, &record.id, &ex.motion_stream, &tensors)?;
        Ok(Outcome::Computed)
    }

    /// Cache file paths that `extract` writes for `id`.
    pub fn cache_paths(&self, id: &str) -> [PathBuf; 2] {
        [
            self.static_cache.path(id, Stream::Static),
            self.motion_cache.path(id, Stream::Motion),
        ]
    }
}

fn store(
    cache: &crate::features::FeatureCache,
    id: &str,
    extractor: &FeatureExtractor,
    tensors: &[InputTensor],
) -> Result<()> {
    let frames = extractor.extract(tensors)?;
    let pooled = pool_features(id, &frames)?;
    cache.store(id, &frames, &pooled)?;
    Ok(())
}
