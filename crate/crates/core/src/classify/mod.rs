//! Per-stream calibrated linear SVMs and late fusion.

pub mod fusion;
pub mod platt;
pub mod svm;

pub use fusion::{decide, fuse_available, late_fuse, ScoredPrediction, DEFAULT_THRESHOLD, SINGLE_STREAM_FLAG};
pub use svm::{class_weights, predict_proba, train_svm, LinearSvmModel, TrainParams, DEFAULT_C};
