use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Stream;

/// Features of one network input.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f32>,
    pub source_stream: Stream,
    pub frame_timestamp_s: f64,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Video-level features of one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledFeature {
    pub video_id: String,
    pub values: Vec<f32>,
    pub source_stream: Stream,
    pub n_frames: usize,
}

impl PooledFeature {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Element-wise arithmetic mean over frames.
///
/// Each coordinate is summed in sorted order, so the result does not depend
/// on the order of `frames`.
pub fn pool_features(video_id: &str, frames: &[FeatureVector]) -> Result<PooledFeature> {
    let first = frames.first().ok_or(Error::NoFeatures)?;
    let dim = first.dim();
    if dim == 0 {
        return Err(Error::NoFeatures);
    }
    for f in frames {
        if f.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: f.dim(),
            });
        }
        if f.source_stream != first.source_stream {
            return Err(Error::InvalidInput(format!(
                "cannot pool {} and {} features together",
                first.source_stream, f.source_stream
            )));
        }
    }
    let n = frames.len();
    let mut column = Vec::with_capacity(n);
    let values = (0..dim)
        .map(|j| {
            column.clear();
            column.extend(frames.iter().map(|f| f.values[j]));
            column.sort_by(f32::total_cmp);
            let sum: f64 = column.iter().map(|&v| f64::from(v)).sum();
            (sum / n as f64) as f32
        })
        .collect();
    Ok(PooledFeature {
        video_id: video_id.to_string(),
        values,
        source_stream: first.source_stream,
        n_frames: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(values: Vec<f32>) -> FeatureVector {
        FeatureVector {
            values,
            source_stream: Stream::Static,
            frame_timestamp_s: 0.0,
        }
    }

    #[test]
    fn single_frame_is_identity() {
        let p = pool_features("v", &[fv(vec![1.5, -2.0, 0.25])]).unwrap();
        assert_eq!(p.values, vec![1.5, -2.0, 0.25]);
        assert_eq!(p.n_frames, 1);
    }

    #[test]
    fn opposite_frames_cancel() {
        let v = vec![0.3, -7.0, 12.5];
        let neg: Vec<f32> = v.iter().map(|x| -x).collect();
        let p = pool_features("v", &[fv(v), fv(neg)]).unwrap();
        assert!(p.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn three_frame_mean() {
        let p = pool_features("v", &[fv(vec![1.0, 2.0]), fv(vec![3.0, 4.0]), fv(vec![5.0, 6.0])]).unwrap();
        assert_eq!(p.values, vec![3.0, 4.0]);
        assert_eq!(p.n_frames, 3);
        assert_eq!(p.video_id, "v");
    }

    #[test]
    fn errors() {
        assert!(matches!(pool_features("v", &[]), Err(Error::NoFeatures)));
        assert!(matches!(
            pool_features("v", &[fv(vec![1.0]), fv(vec![1.0, 2.0])]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
        let mut m = fv(vec![1.0]);
        m.source_stream = Stream::Motion;
        assert!(pool_features("v", &[fv(vec![1.0]), m]).is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_bounded(
            rows in proptest::collection::vec(proptest::collection::vec(-1e3f32..1e3, 4), 1..12),
            rot in 0usize..12,
        ) {
            let frames: Vec<FeatureVector> = rows.iter().cloned().map(fv).collect();
            let mut shuffled = frames.clone();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let a = pool_features("v", &frames).unwrap();
            let b = pool_features("v", &shuffled).unwrap();
            prop_assert_eq!(&a.values, &b.values);
            for j in 0..4 {
                let lo = rows.iter().map(|r| r[j]).fold(f32::INFINITY, f32::min);
                let hi = rows.iter().map(|r| r[j]).fold(f32::NEG_INFINITY, f32::max);
                prop_assert!(a.values[j] >= lo && a.values[j] <= hi);
            }
        }
    }
}
