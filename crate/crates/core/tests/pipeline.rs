mod common;

use std::path::{Path, PathBuf};

use elsascreen::eval::report::{EvalReport, ProtocolTag};
use elsascreen::features::StubMode;
use elsascreen::ingest::{write_manifest, Split, VideoRecord};
use elsascreen::pipeline::{EvalProtocol, Pipeline, PipelineConfig, PredictionLine, STATIC_MODEL_FILE};
use elsascreen::synth::{class_spec, SynthCodec};
use elsascreen::{Error, Label};

/// Writes `n` videos per class with the given codec settings and a manifest.
fn dataset(dir: &Path, n: usize, tweak: impl Fn(&mut elsascreen::synth::SynthSpec)) -> (PathBuf, Vec<VideoRecord>) {
    std::fs::create_dir_all(dir).unwrap();
    let mut records = Vec::new();
    for label in [Label::Sensitive, Label::NonSensitive] {
        for i in 0..n {
            let id = format!("{}{i}", label.as_str());
            let path = dir.join(format!("{id}.avi"));
            let mut spec = class_spec(label, records.len(), 3);
            spec.n_frames = 12;
            tweak(&mut spec);
            spec.write(&path).unwrap();
            records.push(VideoRecord::new(id, path, label));
        }
    }
    let manifest = dir.join("manifest.jsonl");
    write_manifest(&manifest, &records).unwrap();
    (manifest, records)
}

fn pipeline(work: &Path, manifest: &Path) -> (Pipeline, PipelineConfig) {
    let cfg = common::stub_config(work, manifest, StubMode::Projection, StubMode::Projection);
    (Pipeline::new(cfg.clone()).unwrap(), cfg)
}

#[test]
fn extract_caches_both_streams_and_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let (manifest, records) = dataset(&tmp.path().join("v"), 2, |_| {});
    let records = &records[..3];
    let (p, cfg) = pipeline(tmp.path(), &manifest);
    let first = p.extract(records, None).unwrap();
    assert_eq!(first.to_string(), "3 ok, 0 failed");
    assert!(first.inference_calls > 0);
    let files = common::snapshot(&cfg.cache_dir);
    assert_eq!(files.len(), 6);
    for r in records {
        for path in p.cache_paths(&r.id) {
            assert!(path.is_file(), "{}", path.display());
        }
    }
    let second = p.extract(records, None).unwrap();
    assert_eq!(second.inference_calls, 0);
    assert_eq!(second.cache_hits, 3);
    assert_eq!(common::snapshot(&cfg.cache_dir), files);
}

#[test]
fn corrupt_file_is_reported_and_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, mut records) = dataset(&tmp.path().join("v"), 1, |_| {});
    let bad = tmp.path().join("bad.avi");
    std::fs::write(&bad, b"RIFF not really a video").unwrap();
    records.push(VideoRecord::new("bad", &bad, Label::Sensitive));
    let manifest = tmp.path().join("m.jsonl");
    write_manifest(&manifest, &records).unwrap();
    let (p, _) = pipeline(tmp.path(), &manifest);
    let summary = p.extract(&records, None).unwrap();
    assert_eq!(summary.ok.len(), 2);
    assert_eq!(summary.failed.len(), 1);
    assert_eq!(summary.failed[0].id, "bad");
    assert!(!summary.failed[0].reason.is_empty());
}

#[test]
fn train_requires_cache_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (manifest, records) = dataset(&tmp.path().join("v"), 3, |_| {});
    let (p, cfg) = pipeline(tmp.path(), &manifest);
    match p.train(&cfg.models_dir) {
        Err(Error::MissingFeatures(ids)) => assert_eq!(ids.len(), records.len()),
        other => panic!("expected missing features, got {other:?}"),
    }
    p.extract(&records, None).unwrap();
    let a = tmp.path().join("models-a");
    let b = tmp.path().join("models-b");
    let summary = p.train(&a).unwrap();
    assert!(summary.motion_model.is_some());
    p.train(&b).unwrap();
    assert_eq!(common::snapshot(&a), common::snapshot(&b));
    assert_eq!(common::snapshot(&a).len(), 2);
}

#[test]
fn empty_training_split_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, records) = dataset(&tmp.path().join("v"), 1, |_| {});
    let tagged: Vec<VideoRecord> = records.into_iter().map(|r| r.with_split(Split::Test)).collect();
    let manifest = tmp.path().join("m.jsonl");
    write_manifest(&manifest, &tagged).unwrap();
    let (p, cfg) = pipeline(tmp.path(), &manifest);
    assert!(matches!(p.train(&cfg.models_dir), Err(Error::TooFewRecords(_))));
}

fn read_predictions(path: &Path) -> Vec<PredictionLine> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn predict_scores_every_video() {
    let tmp = tempfile::tempdir().unwrap();
    let (manifest, records) = dataset(&tmp.path().join("v"), 3, |_| {});
    let (p, cfg) = pipeline(tmp.path(), &manifest);
    p.extract(&records, None).unwrap();
    p.train(&cfg.models_dir).unwrap();
    let out = tmp.path().join("out/pred.jsonl");
    let dump = tmp.path().join("dump");
    let summary = p.predict(&cfg.models_dir, &out, Some(&dump)).unwrap();
    assert_eq!(summary.n_predicted, 6);
    assert_eq!(summary.n_single_stream, 0);
    let lines = read_predictions(&out);
    for (line, r) in lines.iter().zip(&records) {
        assert_eq!(line.id, r.id);
        assert_eq!(line.label, r.label);
        let (s, m) = (line.p_static.unwrap(), line.p_motion.unwrap());
        assert_eq!(line.p_fused, (s + m) / 2.0);
    }
    let pngs = std::fs::read_dir(dump.join(&records[0].id)).unwrap().count();
    assert!(pngs > 0);
}

#[test]
fn videos_without_motion_are_single_stream() {
    let tmp = tempfile::tempdir().unwrap();
    let (manifest, records) = dataset(&tmp.path().join("train"), 3, |_| {});
    let (p, cfg) = pipeline(tmp.path(), &manifest);
    p.extract(&records, None).unwrap();
    p.train(&cfg.models_dir).unwrap();

    let (intra, _) = dataset(&tmp.path().join("intra"), 1, |s| s.gop = 1);
    let (mjpeg, _) = dataset(&tmp.path().join("mjpeg"), 1, |s| s.codec = SynthCodec::Mjpeg);
    for (name, manifest) in [("intra", intra), ("mjpeg", mjpeg)] {
        let mut cfg = cfg.clone();
        cfg.manifest = manifest;
        // same ids as the training videos, so keep their features apart
        cfg.cache_dir = tmp.path().join(format!("cache-{name}"));
        let p = Pipeline::new(cfg.clone()).unwrap();
        let out = tmp.path().join(format!("{name}.jsonl"));
        let summary = p.predict(&cfg.models_dir, &out, None).unwrap();
        assert_eq!(summary.extract.no_motion.len(), 2, "{name}");
        for line in read_predictions(&out) {
            assert_eq!(line.p_motion, None, "{name}");
            assert_eq!(Some(line.p_fused), line.p_static, "{name}");
            assert_eq!(line.flags, vec!["single-stream".to_string()], "{name}");
        }
    }
}

#[test]
fn models_from_other_descriptors_are_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let (manifest, records) = dataset(&tmp.path().join("v"), 2, |_| {});
    let (p, cfg) = pipeline(tmp.path(), &manifest);
    p.extract(&records, None).unwrap();
    p.train(&cfg.models_dir).unwrap();

    let other = common::stub_config(&tmp.path().join("other"), &manifest, StubMode::Noise, StubMode::Projection);
    let q = Pipeline::new(other).unwrap();
    let err = q.predict(&cfg.models_dir, &tmp.path().join("p.jsonl"), None).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");

    let mut model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(cfg.models_dir.join(STATIC_MODEL_FILE)).unwrap()).unwrap();
    model["stream"] = "motion".into();
    std::fs::write(cfg.models_dir.join(STATIC_MODEL_FILE), model.to_string()).unwrap();
    assert!(p.load_models(&cfg.models_dir).is_err());
}

#[test]
fn evaluate_writes_round_tripping_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, records) = dataset(&tmp.path().join("v"), 4, |_| {});
    let tagged: Vec<VideoRecord> = records
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.with_split(if i % 4 == 3 { Split::Test } else { Split::Train }))
        .collect();
    let manifest = tmp.path().join("m.jsonl");
    write_manifest(&manifest, &tagged).unwrap();
    let (p, _) = pipeline(tmp.path(), &manifest);

    let one = p.evaluate(EvalProtocol::OneByTwo, &tmp.path().join("r1"), None).unwrap();
    let report = one.report.unwrap();
    assert_eq!(report.rows.len(), 9);
    assert_eq!(report.tags(), vec![ProtocolTag::FoldAToB, ProtocolTag::FoldBToA, ProtocolTag::Mean]);
    let text = std::fs::read_to_string(tmp.path().join("r1/report.json")).unwrap();
    let parsed = EvalReport::from_json(&text).unwrap();
    assert_eq!(parsed, report);
    assert!(tmp.path().join("r1/report.txt").is_file());
    // 1×2 ignores test-tagged videos
    let tested: usize = report.analyses.iter().map(|a| a.test_ids.len()).sum();
    assert_eq!(tested, 6);

    let held = p.evaluate(EvalProtocol::Heldout, &tmp.path().join("r2"), None).unwrap();
    let report = held.report.unwrap();
    assert_eq!(report.rows.len(), 3);
    assert_eq!(report.analyses[0].test_ids.len(), 2);
    assert_eq!(EvalReport::from_json(&report.to_json().unwrap()).unwrap(), report);
}

#[test]
fn heldout_needs_both_tags() {
    let tmp = tempfile::tempdir().unwrap();
    let (manifest, _) = dataset(&tmp.path().join("v"), 2, |_| {});
    let (p, _) = pipeline(tmp.path(), &manifest);
    assert!(matches!(
        p.evaluate(EvalProtocol::Heldout, &tmp.path().join("r"), None),
        Err(Error::TooFewRecords(_))
    ));
}
