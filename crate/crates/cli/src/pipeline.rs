//! Corpus-level steps shared by the subcommands: extraction over a corpus
//! tree, metrics files, version comparison and accuracy evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use perfcast_core::metrics::{collect_samples_lenient, extract_metrics, InteractionMetrics, MetricSamples};
use perfcast_core::report::{compare_versions, Exclusion, InteractionVerdicts, ReleaseReport, RunDrilldown};
use perfcast_core::synth::{evaluate_detection, evaluate_extraction, DetectionAccuracy, ExtractionAccuracy, GroundTruth};
use perfcast_core::{
    baseline_detect, detect_regression, discover_screencasts, load_screencast, validate_screencast, ActionType,
    MetricKind, RegressionVerdict,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ToolConfig;

/// A screencast that could not be analyzed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Failure {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExtractOutcome {
    /// Sorted by interaction id, then run index.
    pub records: Vec<InteractionMetrics>,
    pub failures: Vec<Failure>,
}

fn rel_path(root: &Path, dir: &Path) -> String {
    let rel = dir.strip_prefix(root).unwrap_or(dir);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn analyze_dir(root: &Path, dir: &Path, os_version: &str, cfg: &ToolConfig) -> Result<InteractionMetrics> {
    let sc = load_screencast(dir)?;
    if sc.meta.os_version != os_version {
        bail!("metadata says os_version {:?}, expected {os_version:?}", sc.meta.os_version);
    }
    let report = validate_screencast(&sc, cfg.runs_per_version);
    if !report.is_accepted() {
        let reasons: Vec<String> = report.violations.iter().map(|v| format!("{:?}: {}", v.code, v.message)).collect();
        bail!("rejected: {}", reasons.join("; "));
    }
    let mut m = extract_metrics(&sc, &cfg.extract_params())?;
    m.corpus_path = Some(rel_path(root, dir));
    Ok(m)
}

/// Analyze every screencast of `os_version` under `root` on the configured
/// worker pool. A missing version directory is an error; per-screencast
/// problems are collected as failures.
pub fn extract_corpus(root: &Path, os_version: &str, cfg: &ToolConfig) -> Result<ExtractOutcome> {
    if !root.is_dir() {
        bail!("corpus directory {} does not exist", root.display());
    }
    let dirs = discover_screencasts(root, os_version)?;
    let pool = cfg.thread_pool()?;
    let results: Vec<(PathBuf, Result<InteractionMetrics>)> = pool.install(|| {
        dirs.par_iter()
            .map(|d| (d.clone(), analyze_dir(root, d, os_version, cfg)))
            .collect()
    });
    let mut out = ExtractOutcome::default();
    for (dir, r) in results {
        match r {
            Ok(m) => out.records.push(m),
            Err(e) => out.failures.push(Failure {
                path: rel_path(root, &dir),
                reason: format!("{e:#}"),
            }),
        }
    }
    sort_records(&mut out.records);
    out.failures.sort();
    Ok(out)
}

pub fn sort_records(records: &mut [InteractionMetrics]) {
    records.sort_by(|a, b| {
        (a.interaction_id.as_str(), a.run_index, a.os_version.as_str()).cmp(&(
            b.interaction_id.as_str(),
            b.run_index,
            b.os_version.as_str(),
        ))
    });
}

pub fn write_metrics(path: &Path, records: &[InteractionMetrics]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Read a JSON-lines metrics file; blank lines are skipped.
pub fn read_metrics(path: &Path) -> Result<Vec<InteractionMetrics>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}: malformed metrics record", path.display(), i + 1)))
        .collect()
}

/// Which detector produces verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Detector {
    /// Significance, effect size and a perceptual threshold on the median.
    #[default]
    Perceptual,
    /// Significance and effect size only.
    Baseline,
}

#[derive(Debug, Clone)]
pub struct VersionComparison {
    pub base_version: String,
    pub updated_version: String,
    pub groups: Vec<InteractionVerdicts>,
    pub excluded: Vec<Exclusion>,
}

impl VersionComparison {
    pub fn verdicts(&self) -> impl Iterator<Item = &RegressionVerdict> {
        self.groups.iter().flat_map(|g| g.verdicts.iter())
    }
}

fn single_version(records: &[InteractionMetrics], which: &str) -> Result<String> {
    let versions: BTreeSet<&str> = records.iter().map(|r| r.os_version.as_str()).collect();
    match versions.len() {
        0 => bail!("{which} metrics are empty"),
        1 => Ok(versions.into_iter().next().unwrap().to_string()),
        _ => bail!("{which} metrics mix OS versions: {versions:?}"),
    }
}

struct InteractionInfo {
    app_id: String,
    scenario_id: String,
    action_type: ActionType,
}

fn infos(records: &[InteractionMetrics]) -> BTreeMap<&str, InteractionInfo> {
    let mut out = BTreeMap::new();
    for r in records {
        out.entry(r.interaction_id.as_str()).or_insert_with(|| InteractionInfo {
            app_id: r.app_id.clone(),
            scenario_id: r.scenario_id.clone(),
            action_type: r.action_type,
        });
    }
    out
}

fn drilldown_rows(records: &[&InteractionMetrics]) -> Vec<RunDrilldown> {
    records
        .iter()
        .map(|r| RunDrilldown {
            os_version: r.os_version.clone(),
            run_index: r.run_index,
            response_index: r.key_frames.and_then(|k| k.response_index),
            finish_index: r.key_frames.map(|k| k.finish_index),
            response_pts_ms: r.key_frames.and_then(|k| k.response_pts_ms),
            finish_pts_ms: r.key_frames.map(|k| k.finish_pts_ms),
            flags: r.flags.iter().copied().collect(),
            corpus_path: r.corpus_path.clone(),
        })
        .collect()
}

/// Pair base and updated samples per (interaction, metric) and run the
/// detector. Interactions or metrics that cannot be compared are listed in
/// `excluded` with a reason. Regressed interactions carry per-run key frames.
pub fn build_verdicts(
    base: &[InteractionMetrics],
    updated: &[InteractionMetrics],
    cfg: &ToolConfig,
    detector: Detector,
) -> Result<VersionComparison> {
    let base_version = single_version(base, "base")?;
    let updated_version = single_version(updated, "updated")?;
    let base_samples = collect_samples_lenient(base, cfg.min_runs)?;
    let updated_samples = collect_samples_lenient(updated, cfg.min_runs)?;

    let index = |c: &perfcast_core::SampleCollection| -> BTreeMap<(String, MetricKind), MetricSamples> {
        c.samples
            .iter()
            .map(|s| ((s.interaction_id.clone(), s.metric), s.clone()))
            .collect()
    };
    let b_idx = index(&base_samples);
    let u_idx = index(&updated_samples);
    let mut shortfalls: BTreeMap<(String, MetricKind), String> = BTreeMap::new();
    for e in base_samples.insufficient.iter().chain(&updated_samples.insufficient) {
        if let perfcast_core::MetricError::InsufficientRuns { interaction_id, metric, .. } = e {
            shortfalls.entry((interaction_id.clone(), *metric)).or_insert_with(|| e.to_string());
        }
    }

    let b_info = infos(base);
    let u_info = infos(updated);
    let mut excluded = Vec::new();
    let mut groups = Vec::new();
    let ids: BTreeSet<&str> = b_info.keys().chain(u_info.keys()).copied().collect();
    for id in ids {
        let (Some(bi), Some(ui)) = (b_info.get(id), u_info.get(id)) else {
            let side = if b_info.contains_key(id) { &base_version } else { &updated_version };
            excluded.push(Exclusion {
                interaction_id: id.to_string(),
                metric: None,
                reason: format!("present in {side} only"),
            });
            continue;
        };
        if bi.action_type != ui.action_type {
            excluded.push(Exclusion {
                interaction_id: id.to_string(),
                metric: None,
                reason: format!("action type changed from {} to {}", bi.action_type, ui.action_type),
            });
            continue;
        }
        let mut verdicts = Vec::new();
        for &metric in MetricKind::applicable(bi.action_type) {
            let key = (id.to_string(), metric);
            let (Some(b), Some(u)) = (b_idx.get(&key), u_idx.get(&key)) else {
                excluded.push(Exclusion {
                    interaction_id: id.to_string(),
                    metric: Some(metric),
                    reason: shortfalls.get(&key).cloned().unwrap_or_else(|| "no valid runs".into()),
                });
                continue;
            };
            let mc = cfg.metric_config(metric);
            let verdict = match detector {
                Detector::Perceptual => detect_regression(b, u, &mc),
                Detector::Baseline => baseline_detect(b, u, &mc),
            };
            match verdict {
                Ok(v) => verdicts.push(v),
                Err(e) => excluded.push(Exclusion {
                    interaction_id: id.to_string(),
                    metric: Some(metric),
                    reason: e.to_string(),
                }),
            }
        }
        if verdicts.is_empty() {
            continue;
        }
        let drilldown = if verdicts.iter().any(|v| v.regressed) {
            let runs: Vec<&InteractionMetrics> = base
                .iter()
                .chain(updated)
                .filter(|r| r.interaction_id == id)
                .collect();
            drilldown_rows(&runs)
        } else {
            Vec::new()
        };
        groups.push(InteractionVerdicts {
            interaction_id: id.to_string(),
            app_id: bi.app_id.clone(),
            scenario_id: bi.scenario_id.clone(),
            action_type: bi.action_type,
            verdicts,
            drilldown,
        });
    }
    excluded.sort();
    Ok(VersionComparison {
        base_version,
        updated_version,
        groups,
        excluded,
    })
}

/// Full comparison of two metrics sets into a release report.
pub fn compare_records(
    base: &[InteractionMetrics],
    updated: &[InteractionMetrics],
    cfg: &ToolConfig,
    detector: Detector,
) -> Result<ReleaseReport> {
    let vc = build_verdicts(base, updated, cfg, detector)?;
    if vc.groups.is_empty() {
        bail!("no interaction could be compared ({} exclusions)", vc.excluded.len());
    }
    let mut report = compare_versions(&vc.base_version, &vc.updated_version, vc.groups, cfg.tolerance)?;
    report.excluded = vc.excluded;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub screencasts: usize,
    pub failures: usize,
    pub extraction: ExtractionAccuracy,
    pub perceptual: DetectionAccuracy,
    pub baseline: DetectionAccuracy,
}

/// Extract a generated paired corpus and score extraction and both
/// detectors against its ground truth.
pub fn evaluate_corpus(root: &Path, truth: &GroundTruth, cfg: &ToolConfig) -> Result<(AccuracyReport, Vec<Failure>)> {
    if truth.base_version.is_empty() || truth.updated_version.is_empty() {
        bail!("ground truth does not name its base and updated versions");
    }
    let base = extract_corpus(root, &truth.base_version, cfg)?;
    let updated = extract_corpus(root, &truth.updated_version, cfg)?;
    let failures: Vec<Failure> = base.failures.into_iter().chain(updated.failures).collect();
    let all: Vec<InteractionMetrics> = base.records.iter().chain(&updated.records).cloned().collect();
    let extraction = evaluate_extraction(&all, truth)?;
    let score = |d: Detector| -> Result<DetectionAccuracy> {
        let vc = build_verdicts(&base.records, &updated.records, cfg, d)?;
        let verdicts: Vec<RegressionVerdict> = vc.verdicts().cloned().collect();
        evaluate_detection(&verdicts, &truth.labels).map_err(|e| anyhow!(e))
    };
    Ok((
        AccuracyReport {
            screencasts: all.len(),
            failures: failures.len(),
            extraction,
            perceptual: score(Detector::Perceptual)?,
            baseline: score(Detector::Baseline)?,
        },
        failures,
    ))
}

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.digits$}"))
}

/// Plain-text tables for the terminal.
pub fn format_accuracy(r: &AccuracyReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "screencasts analyzed: {} (failed: {})", r.screencasts, r.failures);
    let _ = writeln!(s, "\n{:<16} {:>10} {:>6} {:>7}", "metric", "MAE", "n", "missed");
    for (m, e) in &r.extraction.per_metric {
        let _ = writeln!(s, "{:<16} {:>10} {:>6} {:>7}", m.as_str(), cell(e.mae, 2), e.count, e.missed);
    }
    for (name, d) in [("perceptual", &r.perceptual), ("baseline", &r.baseline)] {
        let _ = writeln!(
            s,
            "\n{name} detector\n{:<16} {:>5} {:>5} {:>5} {:>5} {:>9} {:>7} {:>6}",
            "metric", "TP", "FP", "FN", "TN", "precision", "recall", "F1"
        );
        let rows = d.per_metric.iter().map(|(m, x)| (m.as_str(), x)).chain([("overall", &d.overall)]);
        for (label, x) in rows {
            let c = x.confusion;
            let _ = writeln!(
                s,
                "{label:<16} {:>5} {:>5} {:>5} {:>5} {:>9} {:>7} {:>6}",
                c.tp,
                c.fp,
                c.fn_,
                c.tn,
                cell(x.precision, 3),
                cell(x.recall, 3),
                cell(x.f1, 3)
            );
        }
        let _ = writeln!(
            s,
            "{:<16} {:>23} {:>9} {:>7} {:>6}",
            "average",
            "",
            cell(d.average_precision, 3),
            cell(d.average_recall, 3),
            cell(d.average_f1, 3)
        );
    }
    s
}
