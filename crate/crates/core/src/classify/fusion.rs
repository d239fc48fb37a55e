use serde::{Deserialize, Serialize};

use crate::Label;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Flag set on a prediction that used only one stream.
pub const SINGLE_STREAM_FLAG: &str = "single-stream";

/// Mean of the two stream probabilities.
pub fn late_fuse(p_static: f64, p_motion: f64) -> f64 {
    (p_static + p_motion) / 2.0
}

/// Fuses whichever stream probabilities exist. The flag is true when only
/// one was available.
pub fn fuse_available(p_static: Option<f64>, p_motion: Option<f64>) -> Option<(f64, bool)> {
    match (p_static, p_motion) {
        (Some(s), Some(m)) => Some((late_fuse(s, m), false)),
        (Some(p), None) | (None, Some(p)) => Some((p, true)),
        (None, None) => None,
    }
}

/// Sensitive iff `p ≥ threshold`.
pub fn decide(p_fused: f64, threshold: f64) -> Label {
    if p_fused >= threshold {
        Label::Sensitive
    } else {
        Label::NonSensitive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub video_id: String,
    pub p_static: Option<f64>,
    pub p_motion: Option<f64>,
    pub p_fused: f64,
    pub decided_label: Label,
    pub threshold: f64,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl ScoredPrediction {
    /// `None` when neither stream has a score.
    pub fn new(video_id: &str, p_static: Option<f64>, p_motion: Option<f64>, threshold: f64) -> Option<Self> {
        let (p_fused, single) = fuse_available(p_static, p_motion)?;
        Some(ScoredPrediction {
            video_id: video_id.to_string(),
            p_static,
            p_motion,
            p_fused,
            decided_label: decide(p_fused, threshold),
            threshold,
            flags: if single { vec![SINGLE_STREAM_FLAG.to_string()] } else { Vec::new() },
        })
    }

    pub fn is_single_stream(&self) -> bool {
        self.flags.iter().any(|f| f == SINGLE_STREAM_FLAG)
    }
}
