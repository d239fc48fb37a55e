//! Frozen-CNN feature extraction, pooling and caching.

pub mod backend;
pub mod cache;
pub mod descriptor;
#[cfg(feature = "onnx")]
pub mod onnx;
pub mod pool;
pub mod stub;

pub use backend::{extract_features, load_backend, weights_digest, FeatureExtractor, InferenceBackend, BATCH_SIZE};
pub use cache::{CachedFeatures, FeatureCache};
pub use descriptor::{InputLayout, ModelDescriptor, Provenance, Runtime};
pub use pool::{pool_features, FeatureVector, PooledFeature};
pub use stub::{StubBackend, StubMode, StubWeights};
