//! Release-level aggregation: interaction comparisons, regression rate,
//! rankings and the tolerance gate, plus structured and HTML output.

mod html;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ActionType;
use crate::metrics::{MetricFlag, MetricKind};
use crate::stats::{RegressionVerdict, SeverityBand};

pub use html::render_html;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no interactions to compare")]
    EmptyInput,
    #[error("interaction {0} has no metric verdicts")]
    NoVerdicts(String),
    #[error("interaction {0} appears more than once")]
    DuplicateInteraction(String),
    #[error("tolerance must lie in [0, 1], got {0}")]
    InvalidTolerance(f64),
    #[error("unsupported report schema version {0}")]
    SchemaVersion(u32),
    #[error("malformed report: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("i/o error on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Pass,
    Fail,
}

/// Key frames of one run, for drill-down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDrilldown {
    pub os_version: String,
    pub run_index: u32,
    pub response_index: Option<usize>,
    pub finish_index: Option<usize>,
    pub response_pts_ms: Option<f64>,
    pub finish_pts_ms: Option<f64>,
    pub flags: Vec<MetricFlag>,
    pub corpus_path: Option<String>,
}

/// Verdicts for one interaction, as produced by the per-metric detector.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionVerdicts {
    pub interaction_id: String,
    pub app_id: String,
    pub scenario_id: String,
    pub action_type: ActionType,
    pub verdicts: Vec<RegressionVerdict>,
    pub drilldown: Vec<RunDrilldown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionComparison {
    pub interaction_id: String,
    pub app_id: String,
    pub scenario_id: String,
    pub action_type: ActionType,
    pub regressed: bool,
    /// Base band -> updated band of the most degraded metric.
    pub worst_transition: (SeverityBand, SeverityBand),
    pub verdicts: Vec<RegressionVerdict>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drilldown: Vec<RunDrilldown>,
}

impl InteractionComparison {
    /// The verdict with the largest band downgrade, then the largest
    /// normalized median increase; earlier metrics win exact ties.
    pub fn worst_verdict(&self) -> Option<&RegressionVerdict> {
        worst_of(&self.verdicts)
    }

    pub fn bands_crossed(&self) -> usize {
        self.worst_transition.0.downgrade_to(self.worst_transition.1)
    }

    pub fn normalized_diff(&self) -> f64 {
        self.worst_verdict().map_or(0.0, RegressionVerdict::normalized_diff)
    }
}

fn worst_of(verdicts: &[RegressionVerdict]) -> Option<&RegressionVerdict> {
    verdicts.iter().reduce(|best, v| {
        let better = v
            .bands_crossed()
            .cmp(&best.bands_crossed())
            .then(v.normalized_diff().total_cmp(&best.normalized_diff()));
        if better.is_gt() {
            v
        } else {
            best
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRank {
    pub rank: usize,
    pub interaction_id: String,
    pub app_id: String,
    pub regressed: bool,
    pub bands_crossed: usize,
    pub normalized_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppRank {
    pub rank: usize,
    pub app_id: String,
    pub regressed_interactions: usize,
    pub total_band_downgrade: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionTypeSummary {
    pub action_type: ActionType,
    pub interactions: usize,
    pub regressed: usize,
}

/// An interaction or metric left out of the comparison.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Exclusion {
    pub interaction_id: String,
    pub metric: Option<MetricKind>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseReport {
    pub schema_version: u32,
    pub base_version: String,
    pub updated_version: String,
    pub tolerance: f64,
    pub regression_rate: f64,
    pub decision: Decision,
    pub comparisons: Vec<InteractionComparison>,
    pub app_rankings: Vec<AppRank>,
    pub interaction_rankings: Vec<InteractionRank>,
    #[serde(default)]
    pub action_type_summary: Vec<ActionTypeSummary>,
    #[serde(default)]
    pub excluded: Vec<Exclusion>,
}

impl ReleaseReport {
    /// A report with no comparisons; the gate passes trivially.
    pub fn empty(base_version: &str, updated_version: &str, tolerance: f64) -> Self {
        ReleaseReport {
            schema_version: SCHEMA_VERSION,
            base_version: base_version.to_string(),
            updated_version: updated_version.to_string(),
            tolerance,
            regression_rate: 0.0,
            decision: Decision::Pass,
            comparisons: Vec::new(),
            app_rankings: Vec::new(),
            interaction_rankings: Vec::new(),
            action_type_summary: Vec::new(),
            excluded: Vec::new(),
        }
    }

    pub fn regressed_count(&self) -> usize {
        self.comparisons.iter().filter(|c| c.regressed).count()
    }
}

fn check_tolerance(tolerance: f64) -> Result<(), ReportError> {
    if (0.0..=1.0).contains(&tolerance) {
        Ok(())
    } else {
        Err(ReportError::InvalidTolerance(tolerance))
    }
}

/// Reduce per-metric verdicts to interaction comparisons and apply the
/// release gate: pass iff the share of regressed interactions is at most
/// `tolerance`. An interaction regresses when any of its metrics does.
pub fn compare_versions(
    base_version: &str,
    updated_version: &str,
    groups: Vec<InteractionVerdicts>,
    tolerance: f64,
) -> Result<ReleaseReport, ReportError> {
    check_tolerance(tolerance)?;
    if groups.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let mut by_id: BTreeMap<String, InteractionComparison> = BTreeMap::new();
    for g in groups {
        let worst = worst_of(&g.verdicts).ok_or_else(|| ReportError::NoVerdicts(g.interaction_id.clone()))?;
        let comparison = InteractionComparison {
            worst_transition: (worst.severity_base, worst.severity_updated),
            regressed: g.verdicts.iter().any(|v| v.regressed),
            interaction_id: g.interaction_id,
            app_id: g.app_id,
            scenario_id: g.scenario_id,
            action_type: g.action_type,
            verdicts: g.verdicts,
            drilldown: g.drilldown,
        };
        let id = comparison.interaction_id.clone();
        if by_id.insert(id.clone(), comparison).is_some() {
            return Err(ReportError::DuplicateInteraction(id));
        }
    }

    let comparisons: Vec<InteractionComparison> = by_id.into_values().collect();
    let regressed = comparisons.iter().filter(|c| c.regressed).count();
    let regression_rate = regressed as f64 / comparisons.len() as f64;
    let mut report = ReleaseReport {
        schema_version: SCHEMA_VERSION,
        base_version: base_version.to_string(),
        updated_version: updated_version.to_string(),
        tolerance,
        regression_rate,
        decision: if regression_rate <= tolerance {
            Decision::Pass
        } else {
            Decision::Fail
        },
        comparisons,
        app_rankings: Vec::new(),
        interaction_rankings: Vec::new(),
        action_type_summary: Vec::new(),
        excluded: Vec::new(),
    };
    report.interaction_rankings = rank_interactions(&report);
    report.app_rankings = rank_apps(&report);
    report.action_type_summary = summarize_action_types(&report);
    Ok(report)
}

/// All interactions by band downgrade, then normalized median increase
/// (both descending), then interaction id.
pub fn rank_interactions(report: &ReleaseReport) -> Vec<InteractionRank> {
    let mut rows: Vec<InteractionRank> = report
        .comparisons
        .iter()
        .map(|c| InteractionRank {
            rank: 0,
            interaction_id: c.interaction_id.clone(),
            app_id: c.app_id.clone(),
            regressed: c.regressed,
            bands_crossed: c.bands_crossed(),
            normalized_diff: c.normalized_diff(),
        })
        .collect();
    rows.sort_by(|a, b| {
        b.bands_crossed
            .cmp(&a.bands_crossed)
            .then(b.normalized_diff.total_cmp(&a.normalized_diff))
            .then_with(|| a.interaction_id.cmp(&b.interaction_id))
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    rows
}

/// Apps with at least one regressed interaction, by regressed count and
/// then total band downgrade of those interactions.
pub fn rank_apps(report: &ReleaseReport) -> Vec<AppRank> {
    let mut apps: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for c in report.comparisons.iter().filter(|c| c.regressed) {
        let e = apps.entry(c.app_id.as_str()).or_default();
        e.0 += 1;
        e.1 += c.bands_crossed();
    }
    let mut rows: Vec<AppRank> = apps
        .into_iter()
        .map(|(app_id, (count, bands))| AppRank {
            rank: 0,
            app_id: app_id.to_string(),
            regressed_interactions: count,
            total_band_downgrade: bands,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.regressed_interactions
            .cmp(&a.regressed_interactions)
            .then(b.total_band_downgrade.cmp(&a.total_band_downgrade))
            .then_with(|| a.app_id.cmp(&b.app_id))
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    rows
}

fn summarize_action_types(report: &ReleaseReport) -> Vec<ActionTypeSummary> {
    let mut by_type: BTreeMap<ActionType, (usize, usize)> = BTreeMap::new();
    for c in &report.comparisons {
        let e = by_type.entry(c.action_type).or_default();
        e.0 += 1;
        e.1 += usize::from(c.regressed);
    }
    by_type
        .into_iter()
        .map(|(action_type, (interactions, regressed))| ActionTypeSummary {
            action_type,
            interactions,
            regressed,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Structured,
    Html,
}

pub fn to_json(report: &ReleaseReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<ReleaseReport, ReportError> {
    let report: ReleaseReport = serde_json::from_str(text)?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(ReportError::SchemaVersion(report.schema_version));
    }
    Ok(report)
}

pub fn emit_report(report: &ReleaseReport, format: ReportFormat, out_path: &Path) -> Result<PathBuf, ReportError> {
    let body = match format {
        ReportFormat::Structured => to_json(report),
        ReportFormat::Html => render_html(report),
    };
    if let Some(parent) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| ReportError::IoFailure {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(out_path, body).map_err(|source| ReportError::IoFailure {
        path: out_path.to_path_buf(),
        source,
    })?;
    Ok(out_path.to_path_buf())
}

pub fn parse_report(path: &Path) -> Result<ReleaseReport, ReportError> {
    let text = fs::read_to_string(path).map_err(|source| ReportError::IoFailure {
        path: path.to_path_buf(),
        source,
    })?;
    from_json(&text)
}
