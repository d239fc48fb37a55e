use std::collections::{BTreeMap, BTreeSet};

use log::warn;

use crate::classify::{predict_proba, train_svm, LinearSvmModel, ScoredPrediction, TrainParams};
use crate::error::{Error, Result};
use crate::eval::metrics::{f2, normalized_accuracy, ConfusionCounts};
use crate::eval::report::{AnalysisSummary, EvalReport, EvalRow, ProtocolKind, ProtocolTag, ReportStream};
use crate::eval::split::FoldSplit;
use crate::features::PooledFeature;
use crate::{Label, Stream};

/// Pooled features of one labeled video. Videos without a motion stream
/// (intra-only or a codec without vectors) carry `None`.
#[derive(Debug, Clone)]
pub struct VideoFeatures {
    pub id: String,
    pub label: Label,
    pub static_feature: PooledFeature,
    pub motion_feature: Option<PooledFeature>,
}

#[derive(Debug, Clone)]
pub struct ProtocolParams {
    pub svm_c: f64,
    pub seed: u64,
    pub threshold: f64,
    pub static_descriptor: String,
    pub motion_descriptor: String,
}

/// Models trained on one side of a split.
#[derive(Debug, Clone)]
pub struct StreamModels {
    pub static_model: LinearSvmModel,
    pub motion_model: Option<LinearSvmModel>,
}

/// One train/test run.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub tag: ProtocolTag,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub models: StreamModels,
    pub predictions: Vec<ScoredPrediction>,
    pub rows: Vec<EvalRow>,
}

/// Trains both stream models. The motion model is skipped (with a warning)
/// when the training videos with motion features do not cover both classes.
pub fn train_models(train: &[&VideoFeatures], params: &ProtocolParams) -> Result<StreamModels> {
    let labels: Vec<Label> = train.iter().map(|v| v.label).collect();
    let feats: Vec<PooledFeature> = train.iter().map(|v| v.static_feature.clone()).collect();
    let static_model = train_svm(
        &feats,
        &labels,
        &TrainParams {
            c_param: params.svm_c,
            seed: params.seed,
            descriptor_name: params.static_descriptor.clone(),
        },
    )?;
    let (mf, ml): (Vec<PooledFeature>, Vec<Label>) = train
        .iter()
        .filter_map(|v| v.motion_feature.clone().map(|f| (f, v.label)))
        .unzip();
    let motion_params = TrainParams {
        c_param: params.svm_c,
        seed: params.seed,
        descriptor_name: params.motion_descriptor.clone(),
    };
    let motion_model = match train_svm(&mf, &ml, &motion_params) {
        Ok(m) => Some(m),
        Err(Error::SingleClass { positives, negatives }) => {
            warn!("motion model not trained: {positives} sensitive and {negatives} non-sensitive videos have motion features");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(StreamModels {
        static_model,
        motion_model,
    })
}

pub fn score_video(models: &StreamModels, video: &VideoFeatures, threshold: f64) -> Result<ScoredPrediction> {
    let p_static = predict_proba(&models.static_model, &video.static_feature)?;
    let p_motion = match (&models.motion_model, &video.motion_feature) {
        (Some(m), Some(f)) => Some(predict_proba(m, f)?),
        _ => None,
    };
    Ok(ScoredPrediction::new(&video.id, Some(p_static), p_motion, threshold).expect("static score present"))
}

pub(crate) fn metric_row(stream: ReportStream, tag: ProtocolTag, confusion: ConfusionCounts) -> EvalRow {
    let (acc, f2v) = (normalized_accuracy(&confusion), f2(&confusion));
    let undefined = match (&acc, &f2v) {
        (Err(e), _) | (_, Err(e)) => Some(e.to_string()),
        _ => None,
    };
    EvalRow {
        stream,
        protocol: tag,
        acc: acc.ok(),
        f2: f2v.ok(),
        confusion,
        undefined,
    }
}

fn analysis_rows(tag: ProtocolTag, test: &[&VideoFeatures], preds: &[ScoredPrediction], threshold: f64) -> Vec<EvalRow> {
    let decide = crate::classify::decide;
    let mut stat = ConfusionCounts::default();
    let mut motion = ConfusionCounts::default();
    let mut fused = ConfusionCounts::default();
    for (v, p) in test.iter().zip(preds) {
        stat.record(decide(p.p_static.expect("static score present"), threshold), v.label);
        if let Some(pm) = p.p_motion {
            motion.record(decide(pm, threshold), v.label);
        }
        fused.record(p.decided_label, v.label);
    }
    vec![
        metric_row(ReportStream::Static, tag, stat),
        metric_row(ReportStream::Motion, tag, motion),
        metric_row(ReportStream::Fused, tag, fused),
    ]
}

pub fn run_analysis(
    tag: ProtocolTag,
    train: &[&VideoFeatures],
    test: &[&VideoFeatures],
    params: &ProtocolParams,
) -> Result<Analysis> {
    let models = train_models(train, params)?;
    let predictions = test
        .iter()
        .map(|v| score_video(&models, v, params.threshold))
        .collect::<Result<Vec<_>>>()?;
    let rows = analysis_rows(tag, test, &predictions, params.threshold);
    Ok(Analysis {
        tag,
        train_ids: train.iter().map(|v| v.id.clone()).collect(),
        test_ids: test.iter().map(|v| v.id.clone()).collect(),
        models,
        predictions,
        rows,
    })
}

fn mean_row(a: &EvalRow, b: &EvalRow) -> EvalRow {
    let both = |x: Option<f64>, y: Option<f64>| Some((x? + y?) / 2.0);
    let acc = both(a.acc, b.acc);
    let f2 = both(a.f2, b.f2);
    let undefined = a
        .undefined
        .as_ref()
        .or(b.undefined.as_ref())
        .map(|reason| format!("an analysis is undefined: {reason}"));
    EvalRow {
        stream: a.stream,
        protocol: ProtocolTag::Mean,
        acc,
        f2,
        confusion: a.confusion + b.confusion,
        undefined,
    }
}

fn lookup<'a>(data: &'a BTreeMap<&str, &'a VideoFeatures>, ids: &[String]) -> Result<Vec<&'a VideoFeatures>> {
    ids.iter()
        .map(|id| {
            data.get(id.as_str())
                .copied()
                .ok_or_else(|| Error::IdMismatch(format!("split lists {id:?}, which has no features")))
        })
        .collect()
}

fn index(data: &[VideoFeatures]) -> Result<BTreeMap<&str, &VideoFeatures>> {
    let mut map = BTreeMap::new();
    for v in data {
        if map.insert(v.id.as_str(), v).is_some() {
            return Err(Error::IdMismatch(format!("duplicate video id {:?}", v.id)));
        }
    }
    Ok(map)
}

fn summary(a: &Analysis) -> AnalysisSummary {
    AnalysisSummary {
        tag: a.tag,
        train_ids: a.train_ids.clone(),
        test_ids: a.test_ids.clone(),
        motion_model_trained: a.models.motion_model.is_some(),
        single_stream_predictions: a.predictions.iter().filter(|p| p.is_single_stream()).count(),
    }
}

/// Both analyses of the 1×2-fold protocol.
pub fn run_protocol_analyses(split: &FoldSplit, data: &[VideoFeatures], params: &ProtocolParams) -> Result<[Analysis; 2]> {
    let map = index(data)?;
    let in_split: BTreeSet<&str> = split.fold_a.iter().chain(&split.fold_b).map(String::as_str).collect();
    if in_split.len() != split.len() {
        return Err(Error::IdMismatch("folds overlap".into()));
    }
    if let Some(extra) = map.keys().find(|id| !in_split.contains(*id)) {
        return Err(Error::IdMismatch(format!("video {extra:?} is in neither fold")));
    }
    let a = lookup(&map, &split.fold_a)?;
    let b = lookup(&map, &split.fold_b)?;
    let ab = run_analysis(ProtocolTag::FoldAToB, &a, &b, params)?;
    let ba = run_analysis(ProtocolTag::FoldBToA, &b, &a, params)?;
    Ok([ab, ba])
}

/// Trains on each fold and tests on the other, then averages.
pub fn run_protocol(split: &FoldSplit, data: &[VideoFeatures], params: &ProtocolParams) -> Result<EvalReport> {
    let [ab, ba] = run_protocol_analyses(split, data, params)?;
    let mut rows = Vec::with_capacity(9);
    for (i, stream) in ReportStream::ALL.into_iter().enumerate() {
        debug_assert_eq!(ab.rows[i].stream, stream);
        rows.push(ab.rows[i].clone());
        rows.push(ba.rows[i].clone());
        rows.push(mean_row(&ab.rows[i], &ba.rows[i]));
    }
    Ok(EvalReport::new(
        ProtocolKind::OneByTwo,
        params,
        rows,
        vec![summary(&ab), summary(&ba)],
    ))
}

/// Trains on `train`, tests on `test`.
pub fn run_heldout(train: &[VideoFeatures], test: &[VideoFeatures], params: &ProtocolParams) -> Result<EvalReport> {
    let train_map = index(train)?;
    if let Some(v) = test.iter().find(|v| train_map.contains_key(v.id.as_str())) {
        return Err(Error::IdMismatch(format!("video {:?} is in both train and test", v.id)));
    }
    let tr: Vec<&VideoFeatures> = train.iter().collect();
    let te: Vec<&VideoFeatures> = test.iter().collect();
    let an = run_analysis(ProtocolTag::HeldoutTest, &tr, &te, params)?;
    Ok(EvalReport::new(ProtocolKind::Heldout, params, an.rows.clone(), vec![summary(&an)]))
}

/// Pooled features for `stream`, if present.
pub fn stream_feature(v: &VideoFeatures, stream: Stream) -> Option<&PooledFeature> {
    match stream {
        Stream::Static => Some(&v.static_feature),
        Stream::Motion => v.motion_feature.as_ref(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::split_1x2;
    use crate::ingest::VideoRecord;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pf(stream: Stream, values: Vec<f32>) -> PooledFeature {
        PooledFeature {
            video_id: String::new(),
            values,
            source_stream: stream,
            n_frames: 1,
        }
    }

    fn dataset(n: usize, separable_motion: bool, seed: u64) -> Vec<VideoFeatures> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = if i % 2 == 0 { Label::Sensitive } else { Label::NonSensitive };
                let s = label.sign() as f32;
                let static_feature = pf(Stream::Static, vec![s * 2.0 + rng.gen_range(-0.5..0.5), rng.gen_range(-1.0..1.0)]);
                let motion = if separable_motion {
                    vec![s, rng.gen_range(-1.0..1.0)]
                } else {
                    vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
                };
                VideoFeatures {
                    id: format!("v{i:02}"),
                    label,
                    static_feature,
                    motion_feature: Some(pf(Stream::Motion, motion)),
                }
            })
            .collect()
    }

    fn params() -> ProtocolParams {
        ProtocolParams {
            svm_c: 1.0,
            seed: 7,
            threshold: 0.5,
            static_descriptor: "s".into(),
            motion_descriptor: "m".into(),
        }
    }

    fn records(data: &[VideoFeatures]) -> Vec<VideoRecord> {
        data.iter().map(|v| VideoRecord::new(v.id.clone(), "x", v.label)).collect()
    }

    #[test]
    fn nine_rows_and_perfect_scores() {
        let data = dataset(24, true, 1);
        let split = split_1x2(&records(&data), 3).unwrap();
        let report = run_protocol(&split, &data, &params()).unwrap();
        assert_eq!(report.rows.len(), 9);
        let cells: BTreeSet<_> = report.rows.iter().map(|r| (r.stream, r.protocol)).collect();
        assert_eq!(cells.len(), 9);
        for r in &report.rows {
            assert_eq!(r.acc, Some(1.0), "{r:?}");
            assert_eq!(r.f2, Some(1.0));
        }
        let mean = report.row(ReportStream::Fused, ProtocolTag::Mean).unwrap();
        assert_eq!(mean.confusion.total(), 24);
    }

    #[test]
    fn every_video_tested_once() {
        let data = dataset(20, false, 2);
        let split = split_1x2(&records(&data), 5).unwrap();
        let [ab, ba] = run_protocol_analyses(&split, &data, &params()).unwrap();
        let mut tested: Vec<String> = ab.test_ids.iter().chain(&ba.test_ids).cloned().collect();
        tested.sort();
        let all: Vec<String> = data.iter().map(|v| v.id.clone()).collect();
        assert_eq!(tested, all);
        assert_eq!(ab.train_ids, ba.test_ids);
    }

    #[test]
    fn constant_features_give_half_accuracy() {
        let mut data = dataset(16, true, 3);
        for v in &mut data {
            v.static_feature.values = vec![0.25, 0.25];
            v.motion_feature = Some(pf(Stream::Motion, vec![0.5, 0.5]));
        }
        let split = split_1x2(&records(&data), 1).unwrap();
        let report = run_protocol(&split, &data, &params()).unwrap();
        for r in &report.rows {
            // One class is predicted for everything: one rate is 1, the other 0.
            assert_eq!(r.acc, Some(0.5), "{r:?}");
        }
    }

    #[test]
    fn missing_motion_falls_back_to_static() {
        let mut data = dataset(16, true, 4);
        data[0].motion_feature = None;
        data[1].motion_feature = None;
        let split = split_1x2(&records(&data), 2).unwrap();
        let [ab, ba] = run_protocol_analyses(&split, &data, &params()).unwrap();
        let flagged: Vec<&ScoredPrediction> = ab
            .predictions
            .iter()
            .chain(&ba.predictions)
            .filter(|p| p.is_single_stream())
            .collect();
        assert_eq!(flagged.len(), 2);
        for p in flagged {
            assert_eq!(p.p_motion, None);
            assert_eq!(Some(p.p_fused), p.p_static);
        }
    }

    #[test]
    fn heldout_rows() {
        let train = dataset(16, true, 5);
        let mut test = dataset(8, true, 6);
        for v in &mut test {
            v.id = format!("t{}", v.id);
        }
        let report = run_heldout(&train, &test, &params()).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert!(report.rows.iter().all(|r| r.protocol == ProtocolTag::HeldoutTest));
        assert!(run_heldout(&train, &train, &params()).is_err());
    }

    #[test]
    fn split_and_data_must_agree() {
        let data = dataset(12, true, 7);
        let mut split = split_1x2(&records(&data), 0).unwrap();
        split.fold_a.push("ghost".into());
        assert!(matches!(run_protocol(&split, &data, &params()), Err(Error::IdMismatch(_))));
    }
}
