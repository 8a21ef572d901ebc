//! Synthetic screencasts with known ground truth, and accuracy evaluation of
//! metric extraction and regression detection against that truth.
//!
//! A scene shows a static "before" screen until the response time, a
//! changing "in progress" screen until the finish time, and a static
//! "after" screen until the end. Frames sit on the vsync grid except where a
//! drop schedule removes them.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    screencast_rel_dir, write_screencast, ActionType, CorpusError, Frame, InteractionMeta, Screencast,
    DEFAULT_REFRESH_HZ,
};
use crate::metrics::{InteractionMetrics, MetricKind};
use crate::stats::RegressionVerdict;

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const DEFAULT_JITTER_MS: f64 = 8.0;
pub const DEFAULT_NOISE: u8 = 2;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    InvalidSpec(String),
    #[error("no ground truth for {0}")]
    MissingTruth(String),
    #[error("no label for {0}")]
    MissingLabel(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("i/o error on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed ground truth: {0}")]
    Malformed(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TransitionStyle {
    #[default]
    Abrupt,
    /// Linear cross-fade from the before screen to the after screen.
    Gradual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropEvent {
    /// Frames are removed right after the first vsync slot at or past this time.
    pub after_ms: f64,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub refresh_hz: f64,
    pub action_type: ActionType,
    pub response_at_ms: f64,
    pub finish_at_ms: f64,
    pub transition_style: TransitionStyle,
    pub drop_schedule: Vec<DropEvent>,
    pub noise_amplitude: u8,
    pub duration_ms: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.width < 8 || self.height < 8 {
            return bad(format!("{}x{} is smaller than 8x8", self.width, self.height));
        }
        if !(self.refresh_hz > 0.0 && self.refresh_hz.is_finite()) {
            return bad(format!("refresh_hz {} must be positive", self.refresh_hz));
        }
        if !(0.0 < self.response_at_ms && self.response_at_ms <= self.finish_at_ms && self.finish_at_ms < self.duration_ms) {
            return bad(format!(
                "need 0 < response ({}) <= finish ({}) < duration ({})",
                self.response_at_ms, self.finish_at_ms, self.duration_ms
            ));
        }
        for d in &self.drop_schedule {
            if d.count < 1 {
                return bad("dropped counts must be at least 1".into());
            }
            if !(d.after_ms >= 0.0 && d.after_ms < self.duration_ms) {
                return bad(format!("drop at {} ms lies outside the screencast", d.after_ms));
            }
        }
        Ok(())
    }

    fn period(&self) -> f64 {
        1000.0 / self.refresh_hz
    }

    /// Vsync slots that end up on screen, after the drop schedule.
    fn shown_slots(&self) -> Vec<u64> {
        let period = self.period();
        let last = (self.duration_ms / period).floor() as u64;
        let mut removed = vec![false; last as usize + 1];
        for d in &self.drop_schedule {
            let first = (d.after_ms / period - 1e-9).ceil().max(0.0) as u64;
            for s in first + 1..=first + u64::from(d.count) {
                if s <= last {
                    removed[s as usize] = true;
                }
            }
        }
        (0..=last).filter(|&s| !removed[s as usize]).collect()
    }
}

/// True values for one generated screencast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub os_version: String,
    pub interaction_id: String,
    pub run_index: u32,
    pub action_type: ActionType,
    pub response_time_ms: Option<f64>,
    pub finish_time_ms: Option<f64>,
    pub launch_time_ms: Option<f64>,
    pub dropped_frames: u64,
}

impl TruthEntry {
    pub fn value(&self, metric: MetricKind) -> Option<f64> {
        match metric {
            MetricKind::ResponseTime => self.response_time_ms,
            MetricKind::FinishTime => self.finish_time_ms,
            MetricKind::LaunchTime => self.launch_time_ms,
            MetricKind::DroppedFrames => Some(self.dropped_frames as f64),
        }
    }
}

/// Whether an interaction pair carries an injected regression for a metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionLabel {
    pub interaction_id: String,
    pub metric: MetricKind,
    pub delta: f64,
    pub theta: f64,
    pub regressed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct GroundTruth {
    #[serde(default)]
    pub base_version: String,
    #[serde(default)]
    pub updated_version: String,
    pub screencasts: Vec<TruthEntry>,
    pub labels: Vec<RegressionLabel>,
}

impl GroundTruth {
    pub fn write(&self, path: &Path) -> Result<(), SynthError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        fs::write(path, s).map_err(|source| SynthError::IoFailure {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, SynthError> {
        let text = fs::read_to_string(path).map_err(|source| SynthError::IoFailure {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// FNV-1a over the parts, used to derive per-screencast seeds that do not
/// depend on generation order.
pub fn derive_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for part in parts {
        for b in part.bytes().chain([0xff]) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

struct Painter {
    width: usize,
    height: usize,
    // per-interaction layout offsets
    before_shift: usize,
    after_shift: usize,
    seed: u64,
}

impl Painter {
    fn before(&self) -> Vec<u8> {
        let mut px = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let stripe = ((x + y / 4 + self.before_shift) / 4).is_multiple_of(2);
                let panel = y >= self.height / 4 && y < self.height / 2 && x >= self.width / 4 && x < 3 * self.width / 4;
                px.push(match (panel, stripe) {
                    (true, _) if ((x / 2) + (y / 2)) % 2 == 0 => 40,
                    (true, _) => 120,
                    (false, true) => 70,
                    (false, false) => 170,
                });
            }
        }
        px
    }

    fn after(&self) -> Vec<u8> {
        let mut px = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let stripe = ((x + y + self.after_shift) / 3).is_multiple_of(2);
                let panel = y >= self.height / 2 && x < self.width / 2;
                px.push(match (panel, stripe) {
                    (true, true) => 215,
                    (true, false) => 135,
                    (false, true) => 60,
                    (false, false) => 190,
                });
            }
        }
        px
    }

    /// Loading content for vsync slot `slot`: random 4x4 blocks, so any two
    /// distinct slots look unrelated.
    fn in_progress(&self, slot: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ slot.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let bw = self.width.div_ceil(4);
        let bh = self.height.div_ceil(4);
        let blocks: Vec<u8> = (0..bw * bh).map(|_| rng.gen_range(20..=235)).collect();
        let mut px = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                px.push(blocks[(y / 4) * bw + x / 4]);
            }
        }
        px
    }
}

/// Render a screencast in memory together with its ground truth.
pub fn render_screencast(spec: &SceneSpec, meta: &InteractionMeta) -> Result<(Screencast, TruthEntry), SynthError> {
    spec.validate()?;
    if meta.action_type != spec.action_type {
        return Err(SynthError::InvalidSpec("metadata and scene disagree on action type".into()));
    }
    let period = spec.period();
    let painter = Painter {
        width: spec.width,
        height: spec.height,
        before_shift: (spec.seed % 7) as usize,
        after_shift: ((spec.seed >> 8) % 5) as usize,
        seed: spec.seed,
    };
    let before = painter.before();
    let after = painter.after();
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed.rotate_left(17) ^ 0x5eed);
    let amp = i16::from(spec.noise_amplitude);

    let slots = spec.shown_slots();
    let mut frames = Vec::with_capacity(slots.len());
    for (index, &slot) in slots.iter().enumerate() {
        let t = slot as f64 * period;
        let mut px = if t < spec.response_at_ms {
            before.clone()
        } else if t >= spec.finish_at_ms {
            after.clone()
        } else {
            match spec.transition_style {
                TransitionStyle::Abrupt => painter.in_progress(slot),
                TransitionStyle::Gradual => {
                    let alpha = (t - spec.response_at_ms) / (spec.finish_at_ms - spec.response_at_ms);
                    before
                        .iter()
                        .zip(&after)
                        .map(|(&a, &b)| ((1.0 - alpha) * f64::from(a) + alpha * f64::from(b)).round() as u8)
                        .collect()
                }
            }
        };
        if amp > 0 {
            for v in &mut px {
                let n = noise_rng.gen_range(-amp..=amp);
                *v = (i16::from(*v) + n).clamp(0, 255) as u8;
            }
        }
        frames.push(Frame::new(index, t, spec.width, spec.height, px));
    }

    let dropped_frames = slots.windows(2).map(|w| w[1] - w[0] - 1).sum();
    let launch = spec.action_type.is_launch();
    let truth = TruthEntry {
        os_version: meta.os_version.clone(),
        interaction_id: meta.interaction_id.clone(),
        run_index: meta.run_index,
        action_type: spec.action_type,
        response_time_ms: (!launch).then_some(spec.response_at_ms),
        finish_time_ms: (!launch).then_some(spec.finish_at_ms),
        launch_time_ms: launch.then_some(spec.finish_at_ms),
        dropped_frames,
    };
    let mut meta = meta.clone();
    meta.device_refresh_hz = spec.refresh_hz;
    Ok((Screencast { meta, frames }, truth))
}

/// Render and write one screencast under `corpus_root` in the canonical layout.
pub fn generate_screencast(spec: &SceneSpec, meta: &InteractionMeta, corpus_root: &Path) -> Result<TruthEntry, SynthError> {
    let (sc, truth) = render_screencast(spec, meta)?;
    write_screencast(&sc, &corpus_root.join(screencast_rel_dir(&sc.meta)))?;
    Ok(truth)
}

/// Per-metric shift injected into the updated version.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct MetricDeltas {
    pub response_time: f64,
    pub finish_time: f64,
    pub launch_time: f64,
    pub dropped_frames: u32,
}

impl MetricDeltas {
    pub fn get(&self, metric: MetricKind) -> f64 {
        match metric {
            MetricKind::ResponseTime => self.response_time,
            MetricKind::FinishTime => self.finish_time,
            MetricKind::LaunchTime => self.launch_time,
            MetricKind::DroppedFrames => f64::from(self.dropped_frames),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelThresholds {
    pub response_time: f64,
    pub finish_time: f64,
    pub launch_time: f64,
    pub dropped_frames: f64,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        LabelThresholds {
            response_time: 100.0,
            finish_time: 200.0,
            launch_time: 200.0,
            dropped_frames: 3.0,
        }
    }
}

impl LabelThresholds {
    pub fn get(&self, metric: MetricKind) -> f64 {
        match metric {
            MetricKind::ResponseTime => self.response_time,
            MetricKind::FinishTime => self.finish_time,
            MetricKind::LaunchTime => self.launch_time,
            MetricKind::DroppedFrames => self.dropped_frames,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSpec {
    pub app_id: String,
    pub scenario_id: String,
    pub interaction_id: String,
    pub action_type: ActionType,
    pub response_ms: f64,
    pub finish_ms: f64,
    #[serde(default)]
    pub transition: TransitionStyle,
    /// `(after_ms, count)` pairs applied to every run of both versions.
    #[serde(default)]
    pub drops: Vec<(f64, u32)>,
    #[serde(default)]
    pub delta: MetricDeltas,
}

/// Description of a paired base/updated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs_per_version: u32,
    #[serde(default = "default_base_label")]
    pub base_label: String,
    #[serde(default = "default_updated_label")]
    pub updated_label: String,
    #[serde(default = "default_jitter")]
    pub jitter_ms: f64,
    #[serde(default = "default_noise")]
    pub noise_amplitude: u8,
    #[serde(default = "default_side")]
    pub width: usize,
    #[serde(default = "default_side")]
    pub height: usize,
    #[serde(default = "default_refresh")]
    pub refresh_hz: f64,
    /// Stable time recorded after the finish time.
    #[serde(default = "default_tail")]
    pub tail_ms: f64,
    #[serde(default)]
    pub thresholds: LabelThresholds,
    pub interactions: Vec<InteractionSpec>,
}

fn default_runs() -> u32 {
    20
}
fn default_base_label() -> String {
    "base".into()
}
fn default_updated_label() -> String {
    "updated".into()
}
fn default_jitter() -> f64 {
    DEFAULT_JITTER_MS
}
fn default_noise() -> u8 {
    DEFAULT_NOISE
}
fn default_side() -> usize {
    64
}
fn default_refresh() -> f64 {
    DEFAULT_REFRESH_HZ
}
fn default_tail() -> f64 {
    400.0
}

/// One screencast of a paired corpus, ready to render.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRun {
    pub meta: InteractionMeta,
    pub scene: SceneSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusPlan {
    pub runs: Vec<PlannedRun>,
    pub labels: Vec<RegressionLabel>,
}

/// Expand a corpus spec into per-run scenes and regression labels.
///
/// Every run draws uniform jitter in `[-J, J]` for its response and finish
/// times from a seed derived from (seed, interaction, version, run), so the
/// plan is independent of iteration order. Updated runs add the injected
/// deltas; extra dropped frames land in the stable tail.
pub fn plan_paired_corpus(spec: &CorpusSpec, min_runs: usize) -> Result<CorpusPlan, SynthError> {
    if (spec.runs_per_version as usize) < min_runs.max(1) {
        return Err(SynthError::InvalidSpec(format!(
            "runs_per_version {} is below min_runs {min_runs}",
            spec.runs_per_version
        )));
    }
    if !(spec.jitter_ms >= 0.0) || !(spec.tail_ms > 0.0) {
        return Err(SynthError::InvalidSpec("jitter_ms must be >= 0 and tail_ms > 0".into()));
    }
    if spec.base_label == spec.updated_label {
        return Err(SynthError::InvalidSpec("version labels must differ".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut runs = Vec::new();
    let mut labels = Vec::new();
    for it in &spec.interactions {
        if !seen.insert(it.interaction_id.as_str()) {
            return Err(SynthError::InvalidSpec(format!("duplicate interaction {}", it.interaction_id)));
        }
        for &metric in MetricKind::applicable(it.action_type) {
            let delta = it.delta.get(metric);
            let theta = spec.thresholds.get(metric);
            labels.push(RegressionLabel {
                interaction_id: it.interaction_id.clone(),
                metric,
                delta,
                theta,
                regressed: delta > theta,
            });
        }
        for (label, updated) in [(&spec.base_label, false), (&spec.updated_label, true)] {
            for run in 0..spec.runs_per_version {
                let seed = derive_seed(spec.seed, &[&it.interaction_id, label, &run.to_string()]);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut jitter = || {
                    if spec.jitter_ms > 0.0 {
                        rng.gen_range(-spec.jitter_ms..=spec.jitter_ms)
                    } else {
                        0.0
                    }
                };
                let (jr, jf) = (jitter(), jitter());
                let d = if updated { it.delta } else { MetricDeltas::default() };
                let response = it.response_ms + d.response_time + jr;
                let finish_shift = if it.action_type.is_launch() { d.launch_time } else { d.finish_time };
                let finish = (it.finish_ms + finish_shift + jf).max(response);
                let mut drop_schedule: Vec<DropEvent> = it
                    .drops
                    .iter()
                    .map(|&(after_ms, count)| DropEvent { after_ms, count })
                    .collect();
                if d.dropped_frames > 0 {
                    drop_schedule.push(DropEvent {
                        after_ms: finish + spec.tail_ms / 4.0,
                        count: d.dropped_frames,
                    });
                }
                let extra_tail = f64::from(d.dropped_frames) * 1000.0 / spec.refresh_hz;
                let scene = SceneSpec {
                    width: spec.width,
                    height: spec.height,
                    refresh_hz: spec.refresh_hz,
                    action_type: it.action_type,
                    response_at_ms: response,
                    finish_at_ms: finish,
                    transition_style: it.transition,
                    drop_schedule,
                    noise_amplitude: spec.noise_amplitude,
                    duration_ms: finish + spec.tail_ms + extra_tail,
                    seed,
                };
                scene.validate()?;
                let launch = it.action_type.is_launch();
                runs.push(PlannedRun {
                    meta: InteractionMeta {
                        app_id: it.app_id.clone(),
                        scenario_id: it.scenario_id.clone(),
                        interaction_id: it.interaction_id.clone(),
                        action_type: it.action_type,
                        action_x: (!launch).then_some((spec.width / 2) as f64),
                        action_y: (!launch).then_some((spec.height / 2) as f64),
                        action_timestamp_ms: 0.0,
                        os_version: label.clone(),
                        run_index: run,
                        device_refresh_hz: spec.refresh_hz,
                    },
                    scene,
                });
            }
        }
    }
    Ok(CorpusPlan { runs, labels })
}

/// Write a paired corpus plus `ground_truth.json` under `out_root`.
pub fn generate_paired_corpus(spec: &CorpusSpec, min_runs: usize, out_root: &Path) -> Result<GroundTruth, SynthError> {
    let plan = plan_paired_corpus(spec, min_runs)?;
    let screencasts = plan
        .runs
        .par_iter()
        .map(|r| generate_screencast(&r.scene, &r.meta, out_root))
        .collect::<Result<Vec<_>, _>>()?;
    let truth = GroundTruth {
        base_version: spec.base_label.clone(),
        updated_version: spec.updated_label.clone(),
        screencasts,
        labels: plan.labels,
    };
    truth.write(&out_root.join(GROUND_TRUTH_FILE))?;
    Ok(truth)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricAccuracy {
    /// Mean absolute error; `None` when no case qualifies.
    pub mae: Option<f64>,
    pub count: usize,
    /// Truth present but nothing extracted.
    pub missed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionAccuracy {
    pub per_metric: BTreeMap<MetricKind, MetricAccuracy>,
}

impl ExtractionAccuracy {
    pub fn mae(&self, metric: MetricKind) -> Option<f64> {
        self.per_metric.get(&metric).and_then(|m| m.mae)
    }
}

fn truth_key(os: &str, id: &str, run: u32) -> String {
    format!("{os}/{id}/run_{run}")
}

/// Mean absolute error of extracted metrics. Dropped frames are scored only
/// where the true count is positive.
pub fn evaluate_extraction(predicted: &[InteractionMetrics], truth: &GroundTruth) -> Result<ExtractionAccuracy, SynthError> {
    let index: HashMap<String, &TruthEntry> = truth
        .screencasts
        .iter()
        .map(|t| (truth_key(&t.os_version, &t.interaction_id, t.run_index), t))
        .collect();
    let mut sums: BTreeMap<MetricKind, (f64, usize, usize)> = MetricKind::ALL.iter().map(|&m| (m, (0.0, 0, 0))).collect();
    for p in predicted {
        let key = truth_key(&p.os_version, &p.interaction_id, p.run_index);
        let t = index.get(&key).ok_or(SynthError::MissingTruth(key))?;
        for metric in MetricKind::ALL {
            let Some(tv) = t.value(metric) else { continue };
            if metric == MetricKind::DroppedFrames && tv <= 0.0 {
                continue;
            }
            let e = sums.get_mut(&metric).unwrap();
            match p.value(metric) {
                Some(pv) => {
                    e.0 += (pv - tv).abs();
                    e.1 += 1;
                }
                None => e.2 += 1,
            }
        }
    }
    Ok(ExtractionAccuracy {
        per_metric: sums
            .into_iter()
            .map(|(m, (sum, count, missed))| {
                (
                    m,
                    MetricAccuracy {
                        mae: (count > 0).then(|| sum / count as f64),
                        count,
                        missed,
                    },
                )
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        (p + r > 0.0).then(|| 2.0 * p * r / (p + r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScores {
    pub confusion: Confusion,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl From<Confusion> for DetectionScores {
    fn from(c: Confusion) -> Self {
        DetectionScores {
            confusion: c,
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionAccuracy {
    pub per_metric: BTreeMap<MetricKind, DetectionScores>,
    /// Counts pooled across metrics.
    pub overall: DetectionScores,
    /// Mean of the defined per-metric precision, recall and F1.
    pub average_precision: Option<f64>,
    pub average_recall: Option<f64>,
    pub average_f1: Option<f64>,
}

fn mean_defined(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Precision, recall and F1 of verdicts against generator labels.
pub fn evaluate_detection(verdicts: &[RegressionVerdict], labels: &[RegressionLabel]) -> Result<DetectionAccuracy, SynthError> {
    let index: HashMap<(&str, MetricKind), bool> = labels
        .iter()
        .map(|l| ((l.interaction_id.as_str(), l.metric), l.regressed))
        .collect();
    let mut per: BTreeMap<MetricKind, Confusion> = BTreeMap::new();
    let mut overall = Confusion::default();
    for v in verdicts {
        let actual = *index
            .get(&(v.interaction_id.as_str(), v.metric))
            .ok_or_else(|| SynthError::MissingLabel(format!("{} {}", v.interaction_id, v.metric)))?;
        per.entry(v.metric).or_default().add(v.regressed, actual);
        overall.add(v.regressed, actual);
    }
    let per_metric: BTreeMap<MetricKind, DetectionScores> = per.into_iter().map(|(m, c)| (m, c.into())).collect();
    Ok(DetectionAccuracy {
        average_precision: mean_defined(per_metric.values().map(|s| s.precision)),
        average_recall: mean_defined(per_metric.values().map(|s| s.recall)),
        average_f1: mean_defined(per_metric.values().map(|s| s.f1)),
        per_metric,
        overall: overall.into(),
    })
}
