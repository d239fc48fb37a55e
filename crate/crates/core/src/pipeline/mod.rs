//! End-to-end commands: extract, train, predict, evaluate and probe.

mod commands;
mod config;
mod extract;

pub use commands::{
    probe_manifest, EvalProtocol, EvaluateSummary, PredictSummary, PredictionLine, ProbeSummary, ProbedVideo,
    TrainSummary, MOTION_MODEL_FILE, STATIC_MODEL_FILE,
};
pub use config::PipelineConfig;
pub use extract::{ExtractSummary, VideoFailure};

use crate::error::Result;
use crate::features::{weights_digest, FeatureCache, ModelDescriptor};
use crate::ingest::{load_manifest, VideoRecord};

/// A validated config with its descriptors loaded and cache namespaces resolved.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub static_desc: ModelDescriptor,
    pub motion_desc: ModelDescriptor,
    static_cache: FeatureCache,
    motion_cache: FeatureCache,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let static_desc = ModelDescriptor::load(&config.descriptor_static)?;
        let motion_desc = ModelDescriptor::load(&config.descriptor_motion)?;
        let static_cache = FeatureCache::new(&config.cache_dir, &static_desc.name, &weights_digest(&static_desc.weights_path)?);
        let motion_cache = FeatureCache::new(&config.cache_dir, &motion_desc.name, &weights_digest(&motion_desc.weights_path)?);
        Ok(Pipeline {
            config,
            static_desc,
            motion_desc,
            static_cache,
            motion_cache,
        })
    }

    pub fn records(&self) -> Result<Vec<VideoRecord>> {
        load_manifest(&self.config.manifest)
    }

    pub fn static_cache(&self) -> &FeatureCache {
        &self.static_cache
    }

    pub fn motion_cache(&self) -> &FeatureCache {
        &self.motion_cache
    }
}
