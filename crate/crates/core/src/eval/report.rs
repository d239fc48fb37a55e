use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::ConfusionCounts;
use crate::eval::protocol::ProtocolParams;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStream {
    Static,
    Motion,
    Fused,
}

impl ReportStream {
    pub const ALL: [ReportStream; 3] = [ReportStream::Static, ReportStream::Motion, ReportStream::Fused];

    /// Row title in the text table.
    pub fn title(self) -> &'static str {
        match self {
            ReportStream::Static => "Frames",
            ReportStream::Motion => "Motion Vectors",
            ReportStream::Fused => "Late Fusion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolTag {
    FoldAToB,
    FoldBToA,
    Mean,
    HeldoutTest,
}

impl fmt::Display for ProtocolTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolTag::FoldAToB => "fold_a→b",
            ProtocolTag::FoldBToA => "fold_b→a",
            ProtocolTag::Mean => "mean",
            ProtocolTag::HeldoutTest => "heldout_test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolKind {
    #[serde(rename = "1x2")]
    OneByTwo,
    #[serde(rename = "heldout")]
    Heldout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRow {
    pub stream: ReportStream,
    pub protocol: ProtocolTag,
    /// Normalized accuracy; `None` when a rate is undefined.
    pub acc: Option<f64>,
    pub f2: Option<f64>,
    pub confusion: ConfusionCounts,
    /// Why `acc` or `f2` is missing.
    pub undefined: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSummary {
    pub tag: ProtocolTag,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub motion_model_trained: bool,
    pub single_stream_predictions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub schema_version: u32,
    pub protocol: ProtocolKind,
    pub seed: u64,
    pub svm_c: f64,
    pub threshold: f64,
    pub descriptor_static: String,
    pub descriptor_motion: String,
    pub rows: Vec<EvalRow>,
    pub analyses: Vec<AnalysisSummary>,
    pub notes: Vec<String>,
}

const NOTES: [&str; 4] = [
    "positive class: sensitive",
    "acc and f2 are null when undefined: acc needs both classes among the evaluated videos; f2 needs a positive in truth or prediction; f2 is 0 when there are errors but no true positives",
    "mean rows average the two analyses and are null unless both are defined; their confusion counts are summed",
    "motion rows cover only test videos with motion features; fused rows use the static probability alone for the rest",
];

impl EvalReport {
    pub fn new(protocol: ProtocolKind, params: &ProtocolParams, rows: Vec<EvalRow>, analyses: Vec<AnalysisSummary>) -> Self {
        EvalReport {
            schema_version: REPORT_SCHEMA_VERSION,
            protocol,
            seed: params.seed,
            svm_c: params.svm_c,
            threshold: params.threshold,
            descriptor_static: params.static_descriptor.clone(),
            descriptor_motion: params.motion_descriptor.clone(),
            rows,
            analyses,
            notes: NOTES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn row(&self, stream: ReportStream, tag: ProtocolTag) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.stream == stream && r.protocol == tag)
    }

    pub fn tags(&self) -> Vec<ProtocolTag> {
        let mut tags: Vec<ProtocolTag> = self.rows.iter().map(|r| r.protocol).collect();
        tags.sort();
        tags.dedup();
        tags
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: EvalReport = serde_json::from_str(text)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported report schema version {}",
                report.schema_version
            )));
        }
        Ok(report)
    }

    /// Table with one line per stream and an ACC/F2 column pair per analysis.
    pub fn to_table(&self) -> String {
        let tags = self.tags();
        let pct = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{:.1}", 100.0 * x));
        let mut out = String::new();
        let _ = write!(out, "{:<16}", "");
        for t in &tags {
            let _ = write!(out, " {:>15}", t.to_string());
        }
        out.push('\n');
        let _ = write!(out, "{:<16}", "");
        for _ in &tags {
            let _ = write!(out, " {:>7} {:>7}", "ACC", "F2");
        }
        out.push('\n');
        for stream in ReportStream::ALL {
            let _ = write!(out, "{:<16}", stream.title());
            for &t in &tags {
                match self.row(stream, t) {
                    Some(r) => {
                        let _ = write!(out, " {:>7} {:>7}", pct(r.acc), pct(r.f2));
                    }
                    None => {
                        let _ = write!(out, " {:>7} {:>7}", "-", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// Writes `report.json` and `report.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        for (name, text) in [("report.json", self.to_json()?), ("report.txt", self.to_table())] {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        }
        Ok(())
    }
}
