//! Metrics, the 1×2-fold protocol and reports.

pub mod metrics;
pub mod protocol;
pub mod report;
pub mod split;

pub use metrics::{confusion, f2, f_beta, f_beta_from, normalized_accuracy, ConfusionCounts};
pub use protocol::{
    run_analysis, run_heldout, run_protocol, run_protocol_analyses, score_video, train_models, Analysis,
    ProtocolParams, StreamModels, VideoFeatures,
};
pub use report::{AnalysisSummary, EvalReport, EvalRow, ProtocolKind, ProtocolTag, ReportStream};
pub use split::{split_1x2, FoldSplit};
