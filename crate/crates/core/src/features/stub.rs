//! Deterministic stand-in for a CNN.
//!
//! The "weights" file is a small JSON document:
//!
//! ```json
//! {"layers": {"pool5": 1024}, "mode": "projection", "seed": 7}
//! ```
//!
//! * `projection`: averages the input over a 4×4 grid per channel (48 values)
//!   and multiplies by a fixed pseudo-random matrix of full column rank, so
//!   inputs that are linearly separable in grid-average space stay separable.
//! * `noise`: pseudo-random features seeded by the tensor contents; they carry
//!   no class information.
//! * `constant`: the same vector for every input.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::backend::InferenceBackend;
use crate::ingest::{InputTensor, CHANNELS, INPUT_SIDE};

const GRID: usize = 4;
const PROJECTION_INPUTS: usize = GRID * GRID * CHANNELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubMode {
    Projection,
    Noise,
    Constant,
}

/// Contents of a stub weights file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubWeights {
    pub layers: BTreeMap<String, usize>,
    pub mode: StubMode,
    #[serde(default)]
    pub seed: u64,
}

impl StubWeights {
    pub fn new(layer: &str, width: usize, mode: StubMode, seed: u64) -> Self {
        StubWeights {
            layers: BTreeMap::from([(layer.to_string(), width)]),
            mode,
            seed,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

pub struct StubBackend {
    mode: StubMode,
    seed: u64,
    width: usize,
    /// Row-major `width × PROJECTION_INPUTS` matrix.
    projection: Vec<f32>,
}

impl StubBackend {
    pub fn load(path: &Path, layer: &str) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::Config(format!("cannot read stub weights {}: {e}", path.display())))?;
        let weights: StubWeights = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Config(format!("{}: invalid stub weights: {e}", path.display())))?;
        Self::from_weights(&weights, layer)
    }

    pub fn from_weights(weights: &StubWeights, layer: &str) -> Result<Self> {
        let width = *weights.layers.get(layer).ok_or_else(|| {
            Error::Config(format!(
                "layer {layer:?} not found (available: {:?})",
                weights.layers.keys().collect::<Vec<_>>()
            ))
        })?;
        let projection = match weights.mode {
            StubMode::Projection => {
                let mut rng = ChaCha8Rng::seed_from_u64(weights.seed ^ layer_hash(layer));
                (0..width * PROJECTION_INPUTS).map(|_| rng.gen_range(-1.0f32..1.0)).collect()
            }
            _ => Vec::new(),
        };
        Ok(StubBackend {
            mode: weights.mode,
            seed: weights.seed,
            width,
            projection,
        })
    }

    fn features(&self, t: &InputTensor) -> Vec<f32> {
        match self.mode {
            StubMode::Constant => vec![0.5; self.width],
            StubMode::Noise => {
                let mut h = Sha256::new();
                h.update(self.seed.to_le_bytes());
                for v in t.values() {
                    h.update(v.to_bits().to_le_bytes());
                }
                let digest = h.finalize();
                let mut seed = [0u8; 32];
                seed.copy_from_slice(&digest);
                let mut rng = ChaCha8Rng::from_seed(seed);
                (0..self.width).map(|_| rng.gen_range(-1.0f32..1.0)).collect()
            }
            StubMode::Projection => {
                let cells = grid_means(t);
                self.projection
                    .chunks_exact(PROJECTION_INPUTS)
                    .map(|row| row.iter().zip(&cells).map(|(a, b)| a * b).sum::<f32>() / PROJECTION_INPUTS as f32)
                    .collect()
            }
        }
    }
}

fn layer_hash(layer: &str) -> u64 {
    let digest = Sha256::digest(layer.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn grid_means(t: &InputTensor) -> Vec<f32> {
    let cell = INPUT_SIDE / GRID;
    let mut sums = vec![0f64; PROJECTION_INPUTS];
    for y in 0..INPUT_SIDE {
        for x in 0..INPUT_SIDE {
            let g = (y / cell) * GRID + x / cell;
            for c in 0..CHANNELS {
                sums[g * CHANNELS + c] += f64::from(t.at(y, x, c));
            }
        }
    }
    let n = (cell * cell) as f64;
    sums.into_iter().map(|s| (s / n) as f32).collect()
}

impl InferenceBackend for StubBackend {
    fn output_width(&self) -> usize {
        self.width
    }

    fn run(&self, batch: &[InputTensor]) -> Result<Vec<Vec<f32>>> {
        Ok(batch.iter().map(|t| self.features(t)).collect())
    }
}
