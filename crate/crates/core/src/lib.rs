//! Screencast-based GUI performance metrics and release regression checks.
//!
//! Pipeline: load screencasts ([`corpus`]), compare consecutive frames
//! ([`ssim`]), turn key frames into timings ([`metrics`]), test base against
//! updated samples ([`stats`]) and aggregate verdicts into a release decision
//! ([`report`]). [`synth`] builds labelled corpora for accuracy checks.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod metrics;
pub mod report;
pub mod ssim;
pub mod stats;
pub mod synth;

pub use corpus::{
    discover_screencasts, load_screencast, validate_screencast, write_screencast, ActionType, CorpusError, Frame,
    InteractionMeta, Screencast, ValidationReport, Violation, ViolationCode,
};
pub use metrics::{
    collect_samples, collect_samples_lenient, count_dropped_frames, extract_metrics, ExtractParams, InteractionMetrics,
    MetricError, MetricFlag, MetricKind, MetricSamples, SampleCollection,
};
pub use report::{
    compare_versions, emit_report, parse_report, rank_apps, rank_interactions, render_html, Decision,
    InteractionComparison, InteractionVerdicts, ReleaseReport, ReportError, ReportFormat, RunDrilldown,
};
pub use ssim::{detect_key_frames, ssim, ssim_series, KeyFrameParams, KeyFrames, SsimError, SsimParams, SsimSeries};
pub use stats::{
    baseline_detect, classify_severity, cliffs_delta, detect_regression, median, wilcoxon_rank_sum, Alternative,
    MetricConfig, RankSumMode, RankSumResult, RegressionVerdict, SeverityBand, SeverityCuts, StatsError,
};
pub use synth::{
    evaluate_detection, evaluate_extraction, generate_paired_corpus, generate_screencast, plan_paired_corpus,
    render_screencast, CorpusSpec, GroundTruth, SceneSpec, SynthError, TransitionStyle,
};
