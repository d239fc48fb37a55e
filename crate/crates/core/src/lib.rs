//! Batch screening of cartoon videos for disturbing content.
//!
//! Each video is processed along two independent streams:
//!
//! * the **static** stream samples raw frames at a fixed rate, crops and
//!   resizes them to the 224×224 network input and normalizes them;
//! * the **motion** stream reads the motion vectors already stored in the
//!   compressed bitstream and rasterizes each vector field into an image.
//!
//! A CNN backend turns every image into a feature vector, features are mean
//! pooled per video, a calibrated linear SVM scores each stream, and the two
//! probabilities are averaged (late fusion) into the final decision.
//!
//! The [`pipeline`] module wires the stages together behind a feature cache;
//! [`eval`] implements normalized accuracy, the F-beta measure and the 1×2-fold
//! protocol.

pub mod classify;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod media;
pub mod motion;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};
use std::fmt;

/// Ground-truth or predicted class of a video. The positive class is
/// [`Label::Sensitive`] everywhere in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Sensitive,
    NonSensitive,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Sensitive
    }

    /// +1 for sensitive, -1 otherwise.
    pub fn sign(self) -> f64 {
        match self {
            Label::Sensitive => 1.0,
            Label::NonSensitive => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Sensitive => "sensitive",
            Label::NonSensitive => "non_sensitive",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "sensitive" => Some(Label::Sensitive),
            "non_sensitive" => Some(Label::NonSensitive),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which branch of the pipeline produced a tensor, feature or model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    Static,
    Motion,
}

impl Stream {
    pub const BOTH: [Stream; 2] = [Stream::Static, Stream::Motion];

    pub fn as_str(self) -> &'static str {
        match self {
            Stream::Static => "static",
            Stream::Motion => "motion",
        }
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
