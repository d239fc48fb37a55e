use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::{DEFAULT_C, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};

/// Pipeline settings, read from TOML. Relative paths are resolved against
/// the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    pub descriptor_static: PathBuf,
    pub descriptor_motion: PathBuf,
    pub cache_dir: PathBuf,
    #[serde(default = "default_models_dir")]
    pub models_dir: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_c")]
    pub svm_c: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fps")]
    pub sampling_fps: f64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_models_dir() -> PathBuf {
    PathBuf::from("models")
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_c() -> f64 {
    DEFAULT_C
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_fps() -> f64 {
    1.0
}
fn default_workers() -> usize {
    1
}

impl PipelineConfig {
    pub fn new(manifest: &Path, descriptor_static: &Path, descriptor_motion: &Path, cache_dir: &Path) -> Self {
        PipelineConfig {
            manifest: manifest.to_path_buf(),
            descriptor_static: descriptor_static.to_path_buf(),
            descriptor_motion: descriptor_motion.to_path_buf(),
            cache_dir: cache_dir.to_path_buf(),
            models_dir: default_models_dir(),
            output_dir: default_output_dir(),
            svm_c: DEFAULT_C,
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
            sampling_fps: 1.0,
            workers: 1,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.manifest,
            &mut cfg.descriptor_static,
            &mut cfg.descriptor_motion,
            &mut cfg.cache_dir,
            &mut cfg.models_dir,
            &mut cfg.output_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn validate(&self) -> Result<()> {
        for (what, p) in [
            ("manifest", &self.manifest),
            ("descriptor_static", &self.descriptor_static),
            ("descriptor_motion", &self.descriptor_motion),
        ] {
            if !p.is_file() {
                return Err(Error::Config(format!("{what} {} does not exist", p.display())));
            }
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if !(self.svm_c > 0.0 && self.svm_c.is_finite()) {
            return Err(Error::Config(format!("svm_c must be positive, got {}", self.svm_c)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold must lie in [0, 1], got {}", self.threshold)));
        }
        if !(self.sampling_fps > 0.0 && self.sampling_fps.is_finite()) {
            return Err(Error::Config(format!("sampling_fps must be positive, got {}", self.sampling_fps)));
        }
        Ok(())
    }
}
