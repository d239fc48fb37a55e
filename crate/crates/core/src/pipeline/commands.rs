use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use crate::classify::{LinearSvmModel, ScoredPrediction};
use crate::error::{Error, Result};
use crate::eval::{
    normalized_accuracy, run_heldout, run_protocol, score_video, split_1x2, train_models, ConfusionCounts, EvalReport,
    ProtocolParams, StreamModels, VideoFeatures,
};
use crate::ingest::{load_manifest, probe_record, Split, VideoRecord};
use crate::media;
use crate::pipeline::{ExtractSummary, Pipeline, VideoFailure};
use crate::{Label, Stream};

pub const STATIC_MODEL_FILE: &str = "static.model.json";
pub const MOTION_MODEL_FILE: &str = "motion.model.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalProtocol {
    OneByTwo,
    Heldout,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub n_train: usize,
    pub static_model: PathBuf,
    pub motion_model: Option<PathBuf>,
    /// Normalized accuracy on the training set, per stream.
    pub static_train_acc: Option<f64>,
    pub motion_train_acc: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictSummary {
    pub predictions: PathBuf,
    pub n_predicted: usize,
    pub n_single_stream: usize,
    pub extract: ExtractSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluateSummary {
    pub report_dir: PathBuf,
    pub n_videos: usize,
    pub extract: ExtractSummary,
    #[serde(skip)]
    pub report: Option<EvalReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbedVideo {
    pub id: String,
    pub duration_s: f64,
    pub width: u32,
    pub height: u32,
    pub codec: String,
    pub motion_vectors: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ProbeSummary {
    pub ok: Vec<ProbedVideo>,
    pub failed: Vec<VideoFailure>,
}

/// One line of the predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct PredictionLine {
    pub id: String,
    pub p_static: Option<f64>,
    pub p_motion: Option<f64>,
    pub p_fused: f64,
    pub label: Label,
    pub flags: Vec<String>,
}

impl From<&ScoredPrediction> for PredictionLine {
    fn from(p: &ScoredPrediction) -> Self {
        PredictionLine {
            id: p.video_id.clone(),
            p_static: p.p_static,
            p_motion: p.p_motion,
            p_fused: p.p_fused,
            label: p.decided_label,
            flags: p.flags.clone(),
        }
    }
}

fn training_accuracy(model: &LinearSvmModel, data: &[&VideoFeatures], stream: Stream) -> Option<f64> {
    let mut c = ConfusionCounts::default();
    for v in data {
        if let Some(f) = crate::eval::protocol::stream_feature(v, stream) {
            c.record(model.predict_label(f).ok()?, v.label);
        }
    }
    normalized_accuracy(&c).ok()
}

impl Pipeline {
    pub fn protocol_params(&self) -> ProtocolParams {
        ProtocolParams {
            svm_c: self.config.svm_c,
            seed: self.config.seed,
            threshold: self.config.threshold,
            static_descriptor: self.static_desc.name.clone(),
            motion_descriptor: self.motion_desc.name.clone(),
        }
    }

    /// Cached pooled features of `records`. Fails listing every video whose
    /// static features, or motion features and no-motion marker, are absent.
    pub fn load_features(&self, records: &[VideoRecord]) -> Result<Vec<VideoFeatures>> {
        let mut out = Vec::with_capacity(records.len());
        let mut missing = Vec::new();
        for r in records {
            let Some(stat) = self.static_cache.load(&r.id, Stream::Static)? else {
                missing.push(r.id.clone());
                continue;
            };
            let motion = match self.motion_cache.load(&r.id, Stream::Motion)? {
                Some(m) => Some(m.to_pooled(&r.id, Stream::Motion)),
                None if self.motion_cache.no_motion_reason(&r.id).is_some() => None,
                None => {
                    missing.push(r.id.clone());
                    continue;
                }
            };
            out.push(VideoFeatures {
                id: r.id.clone(),
                label: r.label,
                static_feature: stat.to_pooled(&r.id, Stream::Static),
                motion_feature: motion,
            });
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(Error::MissingFeatures(missing))
        }
    }

    /// Train-tagged records, or every record when nothing is tagged.
    pub fn training_records(records: &[VideoRecord]) -> Vec<VideoRecord> {
        let tagged: Vec<VideoRecord> = records.iter().filter(|r| r.split == Split::Train).cloned().collect();
        if tagged.is_empty() && records.iter().all(|r| r.split == Split::Unassigned) {
            records.to_vec()
        } else {
            tagged
        }
    }

    pub fn train(&self, models_dir: &Path) -> Result<TrainSummary> {
        let records = Self::training_records(&self.records()?);
        if records.is_empty() {
            return Err(Error::TooFewRecords("the training split is empty".into()));
        }
        let data = self.load_features(&records)?;
        let refs: Vec<&VideoFeatures> = data.iter().collect();
        let models = train_models(&refs, &self.protocol_params())?;
        fs::create_dir_all(models_dir).map_err(|e| Error::io(format!("creating {}", models_dir.display()), e))?;
        let static_path = models_dir.join(STATIC_MODEL_FILE);
        models.static_model.save(&static_path)?;
        let motion_path = models_dir.join(MOTION_MODEL_FILE);
        let motion_model = match &models.motion_model {
            Some(m) => {
                m.save(&motion_path)?;
                Some(motion_path)
            }
            None => {
                // A stale file from an earlier run must not be picked up.
                if motion_path.exists() {
                    fs::remove_file(&motion_path).map_err(|e| Error::io(format!("removing {}", motion_path.display()), e))?;
                }
                None
            }
        };
        let summary = TrainSummary {
            n_train: data.len(),
            static_model: static_path,
            motion_model,
            static_train_acc: training_accuracy(&models.static_model, &refs, Stream::Static),
            motion_train_acc: models
                .motion_model
                .as_ref()
                .and_then(|m| training_accuracy(m, &refs, Stream::Motion)),
        };
        info!(
            "trained on {} videos: static training ACC {:?}, motion training ACC {:?}",
            summary.n_train, summary.static_train_acc, summary.motion_train_acc
        );
        Ok(summary)
    }

    /// Loads saved models and checks they were trained with this config's descriptors.
    pub fn load_models(&self, models_dir: &Path) -> Result<StreamModels> {
        let static_model = LinearSvmModel::load(&models_dir.join(STATIC_MODEL_FILE))?;
        let motion_path = models_dir.join(MOTION_MODEL_FILE);
        let motion_model = if motion_path.exists() {
            Some(LinearSvmModel::load(&motion_path)?)
        } else {
            warn!("{} not found; predictions use the static stream only", motion_path.display());
            None
        };
        for (model, desc, stream) in [
            (Some(&static_model), &self.static_desc, Stream::Static),
            (motion_model.as_ref(), &self.motion_desc, Stream::Motion),
        ] {
            let Some(model) = model else { continue };
            if model.descriptor_name != desc.name || model.stream != stream {
                return Err(Error::Config(format!(
                    "{stream} model was trained with descriptor {:?} ({} stream) but the config uses {:?}",
                    model.descriptor_name, model.stream, desc.name
                )));
            }
            if model.dim != desc.feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: desc.feature_dim,
                    got: model.dim,
                });
            }
        }
        Ok(StreamModels {
            static_model,
            motion_model,
        })
    }

    /// Scores every video of the manifest and writes JSON lines to `out`.
    pub fn predict(&self, models_dir: &Path, out: &Path, dump_motion: Option<&Path>) -> Result<PredictSummary> {
        let models = self.load_models(models_dir)?;
        let records = self.records()?;
        let extract = self.extract(&records, dump_motion)?;
        let ok: Vec<VideoRecord> = records
            .into_iter()
            .filter(|r| extract.ok.contains(&r.id))
            .collect();
        let data = self.load_features(&ok)?;
        let predictions = data
            .iter()
            .map(|v| score_video(&models, v, self.config.threshold))
            .collect::<Result<Vec<ScoredPrediction>>>()?;
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        }
        let mut buf = Vec::new();
        for p in &predictions {
            serde_json::to_writer(&mut buf, &PredictionLine::from(p))?;
            buf.write_all(b"\n").expect("writing to a Vec");
        }
        fs::write(out, buf).map_err(|e| Error::io(format!("writing {}", out.display()), e))?;
        Ok(PredictSummary {
            predictions: out.to_path_buf(),
            n_predicted: predictions.len(),
            n_single_stream: predictions.iter().filter(|p| p.is_single_stream()).count(),
            extract,
        })
    }

    /// Runs the chosen protocol and writes `report.json` and `report.txt`
    /// into `out_dir`.
    pub fn evaluate(&self, protocol: EvalProtocol, out_dir: &Path, dump_motion: Option<&Path>) -> Result<EvaluateSummary> {
        let records = self.records()?;
        let (train, test): (Vec<VideoRecord>, Vec<VideoRecord>) = match protocol {
            EvalProtocol::OneByTwo => (records.iter().filter(|r| r.split != Split::Test).cloned().collect(), vec![]),
            EvalProtocol::Heldout => records.iter().cloned().partition(|r| r.split != Split::Test),
        };
        if protocol == EvalProtocol::Heldout {
            let train: Vec<&VideoRecord> = train.iter().filter(|r| r.split == Split::Train).collect();
            if train.is_empty() || test.is_empty() {
                return Err(Error::TooFewRecords(
                    "heldout evaluation needs train-tagged and test-tagged videos".into(),
                ));
            }
        }
        let all: Vec<VideoRecord> = train.iter().chain(&test).cloned().collect();
        let extract = self.extract(&all, dump_motion)?;
        let usable = |rs: &[VideoRecord]| -> Vec<VideoRecord> {
            rs.iter().filter(|r| extract.ok.contains(&r.id)).cloned().collect()
        };
        let report = match protocol {
            EvalProtocol::OneByTwo => {
                let recs = usable(&train);
                let data = self.load_features(&recs)?;
                let split = split_1x2(&recs, self.config.seed)?;
                run_protocol(&split, &data, &self.protocol_params())?
            }
            EvalProtocol::Heldout => {
                let tr: Vec<VideoRecord> = usable(&train).into_iter().filter(|r| r.split == Split::Train).collect();
                let te = usable(&test);
                run_heldout(&self.load_features(&tr)?, &self.load_features(&te)?, &self.protocol_params())?
            }
        };
        report.write(out_dir)?;
        Ok(EvaluateSummary {
            report_dir: out_dir.to_path_buf(),
            n_videos: extract.ok.len(),
            extract,
            report: Some(report),
        })
    }
}

/// Validates a manifest and checks each file decodes.
pub fn probe_manifest(manifest: &Path) -> Result<ProbeSummary> {
    let records = load_manifest(manifest)?;
    let mut summary = ProbeSummary::default();
    for mut r in records {
        match probe_record(&mut r) {
            Ok(info) => summary.ok.push(ProbedVideo {
                id: r.id,
                duration_s: info.duration_s,
                width: info.width,
                height: info.height,
                motion_vectors: media::codec_exports_motion_vectors(&info.codec),
                codec: info.codec,
            }),
            Err(e) => summary.failed.push(VideoFailure {
                id: r.id,
                reason: e.to_string(),
            }),
        }
    }
    Ok(summary)
}
