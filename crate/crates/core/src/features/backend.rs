use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::descriptor::{ModelDescriptor, Runtime};
use crate::features::pool::FeatureVector;
use crate::features::stub::StubBackend;
use crate::ingest::InputTensor;

/// Tensors submitted to the backend per call.
pub const BATCH_SIZE: usize = 8;

/// A loaded network that maps input tensors to the tapped layer's activations.
///
/// Implementations must be usable from several threads at once; concurrent
/// calls on disjoint batches must give the same results as serial calls.
pub trait InferenceBackend: Send + Sync {
    /// Width of the tapped layer as produced by the loaded weights.
    fn output_width(&self) -> usize;

    /// One flattened activation vector per input tensor.
    fn run(&self, batch: &[InputTensor]) -> Result<Vec<Vec<f32>>>;
}

/// Loads the runtime named by the descriptor.
pub fn load_backend(desc: &ModelDescriptor) -> Result<Box<dyn InferenceBackend>> {
    match desc.runtime {
        Runtime::Stub => Ok(Box::new(StubBackend::load(&desc.weights_path, &desc.feature_layer)?)),
        Runtime::Onnx => load_onnx(desc),
    }
}

#[cfg(feature = "onnx")]
fn load_onnx(desc: &ModelDescriptor) -> Result<Box<dyn InferenceBackend>> {
    Ok(Box::new(crate::features::onnx::OnnxBackend::load(desc)?))
}

#[cfg(not(feature = "onnx"))]
fn load_onnx(desc: &ModelDescriptor) -> Result<Box<dyn InferenceBackend>> {
    Err(Error::Config(format!(
        "{}: built without the `onnx` feature",
        desc.name
    )))
}

/// Hex SHA-256 of a weights file.
pub fn weights_digest(path: &Path) -> Result<String> {
    let mut file = File::open(path)
        .map_err(|e| Error::Config(format!("cannot open weights {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file
            .read(&mut buf)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// A descriptor bound to a loaded backend, with an inference call counter.
pub struct FeatureExtractor {
    descriptor: ModelDescriptor,
    backend: Box<dyn InferenceBackend>,
    weights_digest: String,
    calls: AtomicU64,
}

impl FeatureExtractor {
    /// Loads the weights and checks that the tapped layer has the declared width.
    pub fn load(descriptor: &ModelDescriptor) -> Result<Self> {
        descriptor.validate()?;
        let digest = weights_digest(&descriptor.weights_path)?;
        let backend = load_backend(descriptor)?;
        Self::with_backend(descriptor.clone(), backend, digest)
    }

    pub fn with_backend(
        descriptor: ModelDescriptor,
        backend: Box<dyn InferenceBackend>,
        weights_digest: String,
    ) -> Result<Self> {
        let width = backend.output_width();
        if width != descriptor.feature_dim {
            return Err(Error::Config(format!(
                "{}: layer {:?} has width {width} but the descriptor declares feature_dim {}",
                descriptor.name, descriptor.feature_layer, descriptor.feature_dim
            )));
        }
        Ok(FeatureExtractor {
            descriptor,
            backend,
            weights_digest,
            calls: AtomicU64::new(0),
        })
    }

    pub fn descriptor(&self) -> &ModelDescriptor {
        &self.descriptor
    }

    pub fn weights_digest(&self) -> &str {
        &self.weights_digest
    }

    /// Number of backend invocations so far.
    pub fn inference_calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// One feature vector per tensor, in order.
    pub fn extract(&self, tensors: &[InputTensor]) -> Result<Vec<FeatureVector>> {
        for t in tensors {
            t.validate()?;
        }
        let dim = self.descriptor.feature_dim;
        let mut out = Vec::with_capacity(tensors.len());
        for batch in tensors.chunks(BATCH_SIZE) {
            self.calls.fetch_add(1, Ordering::Relaxed);
            let rows = self.backend.run(batch)?;
            if rows.len() != batch.len() {
                return Err(Error::Backend(format!(
                    "{} outputs for a batch of {}",
                    rows.len(),
                    batch.len()
                )));
            }
            for (t, values) in batch.iter().zip(rows) {
                if values.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: values.len(),
                    });
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Backend(format!("{}: non-finite activation", self.descriptor.name)));
                }
                out.push(FeatureVector {
                    values,
                    source_stream: t.stream,
                    frame_timestamp_s: t.timestamp_s,
                });
            }
        }
        Ok(out)
    }
}

/// Runs `extractor` over `tensors`.
pub fn extract_features(extractor: &FeatureExtractor, tensors: &[InputTensor]) -> Result<Vec<FeatureVector>> {
    extractor.extract(tensors)
}
