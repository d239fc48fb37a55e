use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Normalization, INPUT_SIDE};

/// Where the weights behind a descriptor came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ImagenetPretrained,
    ElsagateFinetuned,
    PornographyPretrained,
}

/// Inference runtime that executes the weights file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Runtime {
    /// ONNX graph run by the pure-Rust `tract` engine.
    #[default]
    Onnx,
    /// Deterministic pseudo-features for tests and dry runs.
    Stub,
}

/// Memory layout the network expects for its image input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputLayout {
    #[default]
    Nchw,
    Nhwc,
}

/// A CNN used as a frozen feature extractor, described in a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDescriptor {
    pub name: String,
    /// Relative paths are resolved against the descriptor file's directory.
    pub weights_path: PathBuf,
    #[serde(default)]
    pub runtime: Runtime,
    #[serde(default = "default_input_side")]
    pub input_side: usize,
    #[serde(default)]
    pub input_layout: InputLayout,
    /// Name of the tapped layer (an ONNX tensor or node name for the ONNX runtime).
    pub feature_layer: String,
    pub feature_dim: usize,
    pub channel_means: [f32; 3],
    pub channel_scales: [f32; 3],
    pub provenance: Provenance,
}

fn default_input_side() -> usize {
    INPUT_SIDE
}

impl ModelDescriptor {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading descriptor {}", path.display()), e))?;
        let mut desc: ModelDescriptor = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if desc.weights_path.is_relative() {
            if let Some(dir) = path.parent() {
                desc.weights_path = dir.join(&desc.weights_path);
            }
        }
        desc.validate()?;
        Ok(desc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(format!("writing descriptor {}", path.display()), e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Config("descriptor name is empty".into()));
        }
        if self.input_side != INPUT_SIDE {
            return Err(Error::Config(format!(
                "{}: input_side must be {INPUT_SIDE}, got {}",
                self.name, self.input_side
            )));
        }
        if self.feature_dim == 0 {
            return Err(Error::Config(format!("{}: feature_dim must be positive", self.name)));
        }
        if self.feature_layer.is_empty() {
            return Err(Error::Config(format!("{}: feature_layer is empty", self.name)));
        }
        self.normalization().validate()
    }

    pub fn normalization(&self) -> Normalization {
        Normalization {
            means: self.channel_means,
            scales: self.channel_scales,
        }
    }
}
