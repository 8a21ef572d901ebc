//! Tool configuration: one TOML file, overridden by command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use perfcast_core::metrics::{ExtractParams, DEFAULT_GAP_TOLERANCE, DEFAULT_MIN_RUNS};
use perfcast_core::{KeyFrameParams, MetricConfig, MetricKind, SeverityCuts, SsimParams};
use serde::{Deserialize, Serialize};

/// Per-metric settings; anything left out keeps the built-in default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricOverrides {
    pub theta: Option<f64>,
    pub alpha: Option<f64>,
    pub delta_min: Option<f64>,
    pub severity: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToolConfig {
    pub ssim: SsimParams,
    pub keyframes: KeyFrameParams,
    pub metrics: BTreeMap<MetricKind, MetricOverrides>,
    /// Largest regression rate that still passes the release gate.
    pub tolerance: f64,
    pub runs_per_version: u32,
    pub min_runs: usize,
    pub gap_tolerance: f64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
}

impl Default for ToolConfig {
    fn default() -> Self {
        ToolConfig {
            ssim: SsimParams::default(),
            keyframes: KeyFrameParams::default(),
            metrics: BTreeMap::new(),
            tolerance: 0.02,
            runs_per_version: perfcast_core::corpus::DEFAULT_RUNS_PER_VERSION,
            min_runs: DEFAULT_MIN_RUNS,
            gap_tolerance: DEFAULT_GAP_TOLERANCE,
            jobs: 0,
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tolerance: Option<f64>,
    pub alpha: Option<f64>,
    pub theta: BTreeMap<MetricKind, f64>,
    pub jobs: Option<usize>,
    pub gap_tolerance: Option<f64>,
    pub min_runs: Option<usize>,
}

impl ToolConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ToolConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read `path`, or use defaults when no file is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(ToolConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                ToolConfig::from_toml(&text).with_context(|| format!("invalid config {}", p.display()))
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(t) = o.tolerance {
            self.tolerance = t;
        }
        if let Some(a) = o.alpha {
            for m in MetricKind::ALL {
                self.metrics.entry(m).or_default().alpha = Some(a);
            }
        }
        for (&m, &theta) in &o.theta {
            self.metrics.entry(m).or_default().theta = Some(theta);
        }
        if let Some(j) = o.jobs {
            self.jobs = j;
        }
        if let Some(g) = o.gap_tolerance {
            self.gap_tolerance = g;
        }
        if let Some(n) = o.min_runs {
            self.min_runs = n;
        }
        self.validate()
    }

    pub fn metric_config(&self, metric: MetricKind) -> MetricConfig {
        let mut cfg = MetricConfig::default_for(metric);
        cfg.min_runs = self.min_runs;
        if let Some(o) = self.metrics.get(&metric) {
            cfg.theta = o.theta.unwrap_or(cfg.theta);
            cfg.alpha = o.alpha.unwrap_or(cfg.alpha);
            cfg.delta_min = o.delta_min.unwrap_or(cfg.delta_min);
            if let Some(s) = o.severity {
                cfg.severity = SeverityCuts(s);
            }
        }
        cfg
    }

    pub fn extract_params(&self) -> ExtractParams {
        ExtractParams {
            ssim: self.ssim,
            key_frames: self.keyframes,
            gap_tolerance: self.gap_tolerance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ssim.validate()?;
        self.keyframes.validate()?;
        for m in MetricKind::ALL {
            self.metric_config(m).validate()?;
        }
        if !(0.0..=1.0).contains(&self.tolerance) {
            bail!("tolerance must lie in [0, 1], got {}", self.tolerance);
        }
        if self.runs_per_version == 0 {
            bail!("runs_per_version must be at least 1");
        }
        if self.min_runs == 0 {
            bail!("min_runs must be at least 1");
        }
        if !(self.gap_tolerance >= 0.0 && self.gap_tolerance.is_finite()) {
            bail!("gap_tolerance must be >= 0, got {}", self.gap_tolerance);
        }
        Ok(())
    }

    pub fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        Ok(rayon::ThreadPoolBuilder::new().num_threads(self.jobs).build()?)
    }
}
