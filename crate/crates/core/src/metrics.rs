//! User-perceived metrics of one screencast, and per-run samples for
//! comparing OS versions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ActionType, Screencast};
use crate::ssim::{
    detect_finish_frame, detect_response_frame, ssim_series, KeyFrameParams, SsimError, SsimParams,
};

/// Default gap tolerance applied to the vsync period before counting drops.
pub const DEFAULT_GAP_TOLERANCE: f64 = 0.05;
pub const DEFAULT_MIN_RUNS: usize = 5;

// Absorbs float error in Δt / vsync for gaps that are exact multiples.
const FLOOR_GUARD: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("screencast has {0} frame(s); time metrics need at least 2")]
    TooFewFrames(usize),
    #[error("presentation timestamps not strictly increasing at position {0}")]
    NonMonotonicPts(usize),
    #[error("refresh rate must be positive, got {0}")]
    InvalidRefreshRate(f64),
    #[error("gap tolerance must be non-negative, got {0}")]
    InvalidGapTolerance(f64),
    #[error("{interaction_id} ({os_version}) {metric}: {valid} valid run(s), at least {min_runs} required")]
    InsufficientRuns {
        interaction_id: String,
        os_version: String,
        metric: MetricKind,
        valid: usize,
        min_runs: usize,
    },
    #[error("runs of {0} disagree on action type")]
    InconsistentGroup(String),
    #[error(transparent)]
    Ssim(#[from] SsimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    ResponseTime,
    FinishTime,
    LaunchTime,
    DroppedFrames,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::ResponseTime,
        MetricKind::FinishTime,
        MetricKind::LaunchTime,
        MetricKind::DroppedFrames,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::ResponseTime => "response_time",
            MetricKind::FinishTime => "finish_time",
            MetricKind::LaunchTime => "launch_time",
            MetricKind::DroppedFrames => "dropped_frames",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            MetricKind::DroppedFrames => "frames",
            _ => "ms",
        }
    }

    pub fn is_time(self) -> bool {
        self != MetricKind::DroppedFrames
    }

    /// Metrics defined for an interaction of the given type.
    pub fn applicable(action: ActionType) -> &'static [MetricKind] {
        if action.is_launch() {
            &[MetricKind::LaunchTime, MetricKind::DroppedFrames]
        } else {
            &[MetricKind::ResponseTime, MetricKind::FinishTime, MetricKind::DroppedFrames]
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MetricFlag {
    NoVisualResponse,
    UnstableTail,
}

/// Where the key frames landed, kept for drill-down views.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyFrameRecord {
    pub response_index: Option<usize>,
    pub finish_index: usize,
    pub response_pts_ms: Option<f64>,
    pub finish_pts_ms: f64,
}

/// Metrics of one screencast; one line of a metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionMetrics {
    pub screencast_id: String,
    pub interaction_id: String,
    pub app_id: String,
    pub scenario_id: String,
    pub action_type: ActionType,
    pub os_version: String,
    pub run_index: u32,
    pub response_time_ms: Option<f64>,
    pub finish_time_ms: Option<f64>,
    pub launch_time_ms: Option<f64>,
    pub dropped_frames: u64,
    pub flags: BTreeSet<MetricFlag>,
    pub key_frames: Option<KeyFrameRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_path: Option<String>,
}

impl InteractionMetrics {
    pub fn value(&self, metric: MetricKind) -> Option<f64> {
        match metric {
            MetricKind::ResponseTime => self.response_time_ms,
            MetricKind::FinishTime => self.finish_time_ms,
            MetricKind::LaunchTime => self.launch_time_ms,
            MetricKind::DroppedFrames => Some(self.dropped_frames as f64),
        }
    }

    pub fn has_flag(&self, flag: MetricFlag) -> bool {
        self.flags.contains(&flag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractParams {
    pub ssim: SsimParams,
    pub key_frames: KeyFrameParams,
    pub gap_tolerance: f64,
}

impl Default for ExtractParams {
    fn default() -> Self {
        ExtractParams {
            ssim: SsimParams::default(),
            key_frames: KeyFrameParams::default(),
            gap_tolerance: DEFAULT_GAP_TOLERANCE,
        }
    }
}

/// Count frames missed against the vsync cadence.
///
/// Each adjacent gap Δt contributes `max(0, ⌊Δt / (vsync·(1+ε))⌋ − 1)` where
/// `vsync = 1000 / refresh_hz` ms and ε is `gap_tolerance`.
pub fn count_dropped_frames(pts: &[f64], refresh_hz: f64, gap_tolerance: f64) -> Result<u64, MetricError> {
    if !(refresh_hz > 0.0 && refresh_hz.is_finite()) {
        return Err(MetricError::InvalidRefreshRate(refresh_hz));
    }
    if !(gap_tolerance >= 0.0 && gap_tolerance.is_finite()) {
        return Err(MetricError::InvalidGapTolerance(gap_tolerance));
    }
    let period = 1000.0 / refresh_hz * (1.0 + gap_tolerance);
    let mut total = 0u64;
    for (i, w) in pts.windows(2).enumerate() {
        let gap = w[1] - w[0];
        if !(gap > 0.0) {
            return Err(MetricError::NonMonotonicPts(i + 1));
        }
        let slots = (gap / period + FLOOR_GUARD).floor() as u64;
        total += slots.saturating_sub(1);
    }
    Ok(total)
}

/// Extract response/finish (or launch) time and dropped frames.
pub fn extract_metrics(sc: &Screencast, params: &ExtractParams) -> Result<InteractionMetrics, MetricError> {
    let n = sc.frames.len();
    if n < 2 {
        return Err(MetricError::TooFewFrames(n));
    }
    params.key_frames.validate()?;
    let pts = sc.pts();
    let dropped_frames = count_dropped_frames(&pts, sc.meta.device_refresh_hz, params.gap_tolerance)?;
    let series = ssim_series(sc, &params.ssim)?;
    let kp = &params.key_frames;
    let start = pts[0];

    let mut out = InteractionMetrics {
        screencast_id: sc.id(),
        interaction_id: sc.meta.interaction_id.clone(),
        app_id: sc.meta.app_id.clone(),
        scenario_id: sc.meta.scenario_id.clone(),
        action_type: sc.meta.action_type,
        os_version: sc.meta.os_version.clone(),
        run_index: sc.meta.run_index,
        response_time_ms: None,
        finish_time_ms: None,
        launch_time_ms: None,
        dropped_frames,
        flags: BTreeSet::new(),
        key_frames: None,
        corpus_path: None,
    };

    let finish = match detect_finish_frame(&series, kp) {
        Ok(f) => f,
        Err(SsimError::NoVisualResponse) => {
            out.flags.insert(MetricFlag::NoVisualResponse);
            return Ok(out);
        }
        Err(e) => return Err(e.into()),
    };
    if finish.unstable_tail {
        out.flags.insert(MetricFlag::UnstableTail);
    }
    let finish_ms = pts[finish.index] - start;

    if sc.meta.action_type.is_launch() {
        out.launch_time_ms = Some(finish_ms);
        out.key_frames = Some(KeyFrameRecord {
            response_index: None,
            finish_index: finish.index,
            response_pts_ms: None,
            finish_pts_ms: pts[finish.index],
        });
    } else {
        let response = detect_response_frame(&series, kp)?;
        out.response_time_ms = Some(pts[response] - start);
        out.finish_time_ms = Some(finish_ms);
        out.key_frames = Some(KeyFrameRecord {
            response_index: Some(response),
            finish_index: finish.index,
            response_pts_ms: Some(pts[response]),
            finish_pts_ms: pts[finish.index],
        });
    }
    Ok(out)
}

/// Per-run values of one metric for one interaction under one OS version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSamples {
    pub interaction_id: String,
    pub metric: MetricKind,
    pub os_version: String,
    /// Ordered by run index.
    pub values: Vec<f64>,
    /// Runs left out because no visual response was detected.
    pub excluded: usize,
}

/// Samples that could be built, plus the ones that fell short of `min_runs`.
#[derive(Debug, Clone, Default)]
pub struct SampleCollection {
    pub samples: Vec<MetricSamples>,
    pub insufficient: Vec<MetricError>,
}

/// Group metrics by (interaction, OS version) and build one sample per
/// applicable metric. Shortfalls are reported rather than raised.
pub fn collect_samples_lenient(metrics: &[InteractionMetrics], min_runs: usize) -> Result<SampleCollection, MetricError> {
    let mut groups: BTreeMap<(&str, &str), Vec<&InteractionMetrics>> = BTreeMap::new();
    for m in metrics {
        groups
            .entry((m.interaction_id.as_str(), m.os_version.as_str()))
            .or_default()
            .push(m);
    }

    let mut out = SampleCollection::default();
    for ((interaction_id, os_version), mut runs) in groups {
        runs.sort_by_key(|m| m.run_index);
        let action = runs[0].action_type;
        if runs.iter().any(|m| m.action_type != action) {
            return Err(MetricError::InconsistentGroup(interaction_id.to_string()));
        }
        for &metric in MetricKind::applicable(action) {
            let mut values = Vec::with_capacity(runs.len());
            let mut excluded = 0;
            for run in &runs {
                if metric.is_time() && run.has_flag(MetricFlag::NoVisualResponse) {
                    excluded += 1;
                    continue;
                }
                match run.value(metric) {
                    Some(v) => values.push(v),
                    None => excluded += 1,
                }
            }
            if values.len() < min_runs.max(1) {
                out.insufficient.push(MetricError::InsufficientRuns {
                    interaction_id: interaction_id.to_string(),
                    os_version: os_version.to_string(),
                    metric,
                    valid: values.len(),
                    min_runs,
                });
                continue;
            }
            out.samples.push(MetricSamples {
                interaction_id: interaction_id.to_string(),
                metric,
                os_version: os_version.to_string(),
                values,
                excluded,
            });
        }
    }
    Ok(out)
}

/// Strict variant: any metric short of `min_runs` is an error.
pub fn collect_samples(metrics: &[InteractionMetrics], min_runs: usize) -> Result<Vec<MetricSamples>, MetricError> {
    let mut collection = collect_samples_lenient(metrics, min_runs)?;
    match collection.insufficient.is_empty() {
        true => Ok(collection.samples),
        false => Err(collection.insufficient.swap_remove(0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Frame, InteractionMeta};
    use proptest::prelude::*;

    const VSYNC_60: f64 = 1000.0 / 60.0;

    #[test]
    fn no_gap_no_drop() {
        assert_eq!(count_dropped_frames(&[0.0, 16.67, 33.33], 60.0, 0.05), Ok(0));
        assert_eq!(count_dropped_frames(&[0.0, 16.67, 33.33], 60.0, 0.0), Ok(0));
    }

    #[test]
    fn fifty_ms_gap_at_both_tolerances() {
        let pts = [0.0, 16.67, 66.67, 83.33];
        // ⌊50 / 17.5⌋ − 1
        assert_eq!(count_dropped_frames(&pts, 60.0, 0.05), Ok(1));
        // ⌊50 / 16.67⌋ − 1
        assert_eq!(count_dropped_frames(&pts, 60.0, 0.0), Ok(2));
    }

    #[test]
    fn single_frame_and_errors() {
        assert_eq!(count_dropped_frames(&[5.0], 60.0, 0.05), Ok(0));
        assert_eq!(count_dropped_frames(&[], 60.0, 0.05), Ok(0));
        assert_eq!(
            count_dropped_frames(&[0.0, 16.0, 16.0], 60.0, 0.05),
            Err(MetricError::NonMonotonicPts(2))
        );
        assert!(matches!(
            count_dropped_frames(&[0.0, 16.0], 0.0, 0.05),
            Err(MetricError::InvalidRefreshRate(_))
        ));
    }

    fn meta(action: ActionType, run_index: u32) -> InteractionMeta {
        InteractionMeta {
            app_id: "video".into(),
            scenario_id: "tabs".into(),
            interaction_id: "video-tab".into(),
            action_type: action,
            action_x: (!action.is_launch()).then_some(10.0),
            action_y: (!action.is_launch()).then_some(10.0),
            action_timestamp_ms: 0.0,
            os_version: "base".into(),
            run_index,
            device_refresh_hz: 60.0,
        }
    }

    fn cast_from_levels(action: ActionType, pts: &[f64], levels: &[u8]) -> Screencast {
        let frames = pts
            .iter()
            .zip(levels)
            .enumerate()
            .map(|(i, (&t, &v))| {
                // checker texture modulated by level, so no window is flat
                let px = (0..16 * 16)
                    .map(|k| if (k % 16 + k / 16) % 2 == 0 { v } else { v.wrapping_add(60) })
                    .collect();
                Frame::new(i, t, 16, 16, px)
            })
            .collect();
        Screencast {
            meta: meta(action, 0),
            frames,
        }
    }

    #[test]
    fn figure_timeline_metrics() {
        // f1..f8 at the annotated timestamps, change from f3 through f8,
        // followed by stable frames.
        let mut pts = vec![0.0, 16.0, 33.0, 50.0, 66.0, 83.0, 100.0, 116.0];
        let mut levels = vec![20, 20, 60, 100, 140, 20, 100, 180];
        for k in 1..=6 {
            pts.push(116.0 + 16.67 * k as f64);
            levels.push(180);
        }
        let sc = cast_from_levels(ActionType::Tap, &pts, &levels);
        let m = extract_metrics(&sc, &ExtractParams::default()).unwrap();
        assert_eq!(m.response_time_ms, Some(33.0));
        assert_eq!(m.finish_time_ms, Some(116.0));
        assert_eq!(m.launch_time_ms, None);
        assert!(m.flags.is_empty());
    }

    #[test]
    fn launch_reports_only_launch_time() {
        let pts: Vec<f64> = (0..60)
            .map(|k| 16.666 * k as f64)
            .chain([1200.0, 1216.67, 1233.33, 1250.0, 1266.67, 1283.33])
            .collect();
        let mut levels = vec![10u8; 60];
        levels[40] = 50;
        levels.extend([150; 6]);
        let sc = cast_from_levels(ActionType::Launch, &pts, &levels);
        let m = extract_metrics(&sc, &ExtractParams::default()).unwrap();
        assert_eq!(m.launch_time_ms, Some(1200.0));
        assert_eq!(m.response_time_ms, None);
        assert_eq!(m.finish_time_ms, None);
        // the 983 -> 1200 ms gap skips several vsync slots
        assert!(m.dropped_frames > 0);
    }

    #[test]
    fn static_cast_has_no_visual_response() {
        let pts = [0.0, 16.67, 66.67, 83.33];
        let sc = cast_from_levels(ActionType::Tap, &pts, &[30, 30, 30, 30]);
        let m = extract_metrics(&sc, &ExtractParams::default()).unwrap();
        assert_eq!(m.flags, BTreeSet::from([MetricFlag::NoVisualResponse]));
        assert_eq!((m.response_time_ms, m.finish_time_ms), (None, None));
        assert_eq!(m.dropped_frames, 1);
    }

    #[test]
    fn single_frame_is_too_few() {
        let sc = cast_from_levels(ActionType::Tap, &[0.0], &[1]);
        assert_eq!(extract_metrics(&sc, &ExtractParams::default()), Err(MetricError::TooFewFrames(1)));
    }

    fn record(run: u32, finish: f64, no_response: bool) -> InteractionMetrics {
        let mut flags = BTreeSet::new();
        if no_response {
            flags.insert(MetricFlag::NoVisualResponse);
        }
        InteractionMetrics {
            screencast_id: format!("base/video-tab/run_{run}"),
            interaction_id: "video-tab".into(),
            app_id: "video".into(),
            scenario_id: "tabs".into(),
            action_type: ActionType::Tap,
            os_version: "base".into(),
            run_index: run,
            response_time_ms: (!no_response).then_some(100.0),
            finish_time_ms: (!no_response).then_some(finish),
            launch_time_ms: None,
            dropped_frames: 0,
            flags,
            key_frames: None,
            corpus_path: None,
        }
    }

    #[test]
    fn twenty_identical_runs() {
        let runs: Vec<_> = (0..20).map(|r| record(r, 1000.0, false)).collect();
        let samples = collect_samples(&runs, 5).unwrap();
        let ft = samples.iter().find(|s| s.metric == MetricKind::FinishTime).unwrap();
        assert_eq!(ft.values, vec![1000.0; 20]);
        assert_eq!(samples.len(), 3);
    }

    #[test]
    fn flagged_runs_are_excluded_from_time_metrics() {
        let runs: Vec<_> = (0..20).map(|r| record(r, 1000.0 + r as f64, r % 7 == 3)).collect();
        let samples = collect_samples(&runs, 5).unwrap();
        let ft = samples.iter().find(|s| s.metric == MetricKind::FinishTime).unwrap();
        assert_eq!(ft.values.len(), 17);
        assert_eq!(ft.excluded, 3);
        assert!(ft.values.windows(2).all(|w| w[0] < w[1]), "ordered by run index");
        let df = samples.iter().find(|s| s.metric == MetricKind::DroppedFrames).unwrap();
        assert_eq!(df.values.len(), 20);
    }

    #[test]
    fn too_few_valid_runs() {
        let runs: Vec<_> = (0..4).map(|r| record(r, 1000.0, false)).collect();
        assert!(matches!(
            collect_samples(&runs, 5),
            Err(MetricError::InsufficientRuns { valid: 4, min_runs: 5, .. })
        ));
    }

    /// Simulates the vsync grid directly: the frame at slot s_k was shown,
    /// every slot strictly between two shown slots was missed.
    fn missed_slots(slots: &[u64]) -> u64 {
        slots.windows(2).map(|w| w[1] - w[0] - 1).sum()
    }

    proptest! {
        #[test]
        fn matches_grid_simulation_without_tolerance(
            steps in proptest::collection::vec(1u64..12, 1..60),
            offset in 0u64..1000,
        ) {
            let mut slots = vec![offset];
            for s in steps {
                slots.push(slots.last().unwrap() + s);
            }
            let pts: Vec<f64> = slots.iter().map(|&s| s as f64 * VSYNC_60).collect();
            prop_assert_eq!(count_dropped_frames(&pts, 60.0, 0.0).unwrap(), missed_slots(&slots));
        }

        #[test]
        fn translation_invariant(
            gaps in proptest::collection::vec(1u32..120, 1..40),
            shift in -5000i32..5000,
            eps in prop_oneof![Just(0.0), Just(0.05)],
        ) {
            // integral milliseconds keep every gap exact under the shift
            let mut pts = vec![0.0];
            for g in gaps {
                pts.push(pts.last().unwrap() + f64::from(g));
            }
            let shifted: Vec<f64> = pts.iter().map(|p| p + f64::from(shift)).collect();
            prop_assert_eq!(
                count_dropped_frames(&pts, 60.0, eps).unwrap(),
                count_dropped_frames(&shifted, 60.0, eps).unwrap()
            );
        }
    }
}
