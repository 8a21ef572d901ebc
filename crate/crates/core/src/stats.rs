//! Regression decision for one metric of one interaction: a one-sided
//! Wilcoxon rank-sum test, Cliff's delta and a perceptual threshold on the
//! median difference.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::metrics::{MetricKind, MetricSamples, DEFAULT_MIN_RUNS};

/// Largest combined sample size for which the exact null distribution is
/// computed.
pub const EXACT_MAX_TOTAL: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("exact rank-sum test limited to {EXACT_MAX_TOTAL} observations, got {0}")]
    ExactInfeasible(usize),
    #[error("metric mismatch: config {config}, base {base}, updated {updated}")]
    MetricMismatch {
        config: MetricKind,
        base: MetricKind,
        updated: MetricKind,
    },
    #[error("samples belong to different interactions: {0} vs {1}")]
    InteractionMismatch(String, String),
    #[error("{which} sample has {got} run(s), at least {min_runs} required")]
    InsufficientRuns {
        which: &'static str,
        got: usize,
        min_runs: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    /// The second sample tends to be larger.
    BGreater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankSumMode {
    Exact,
    Approximate,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumResult {
    /// Sum of the midranks of `b` in the pooled sample.
    pub rank_sum: f64,
    /// Mann-Whitney U of `b`: `rank_sum - nb (nb + 1) / 2`.
    pub u: f64,
    pub p_value: f64,
    pub exact: bool,
}

fn check_sample(xs: &[f64]) -> Result<(), StatsError> {
    if xs.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Doubled midranks (so they stay integral) of the pooled sample, `a` first,
/// plus the tie-group sizes.
fn doubled_midranks(a: &[f64], b: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share the rank (start + 1 + end) / 2
        let doubled = (start + 1 + end) as u64;
        for &k in &order[start..end] {
            ranks[k] = doubled;
        }
        ties.push((end - start) as u64);
        start = end;
    }
    (ranks, ties)
}

/// Standard normal upper tail.
fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Wilcoxon rank-sum (Mann-Whitney) test of `b` against `a`.
///
/// Ties receive midranks. The exact mode computes the permutation
/// distribution of the rank sum over all `C(na + nb, nb)` splits of the
/// pooled midranks; the approximate mode uses the normal approximation with
/// tie-corrected variance and a 0.5 continuity correction.
pub fn wilcoxon_rank_sum(
    a: &[f64],
    b: &[f64],
    mode: RankSumMode,
    alternative: Alternative,
) -> Result<RankSumResult, StatsError> {
    check_sample(a)?;
    check_sample(b)?;
    let (na, nb) = (a.len(), b.len());
    let total = na + nb;
    let exact = match mode {
        RankSumMode::Exact if total > EXACT_MAX_TOTAL => return Err(StatsError::ExactInfeasible(total)),
        RankSumMode::Exact => true,
        RankSumMode::Approximate => false,
        RankSumMode::Auto => total <= EXACT_MAX_TOTAL,
    };

    let (ranks, ties) = doubled_midranks(a, b);
    let observed: u64 = ranks[na..].iter().sum();
    let rank_sum = observed as f64 / 2.0;
    let u = rank_sum - (nb * (nb + 1)) as f64 / 2.0;

    let p_value = if exact {
        exact_p(&ranks, nb, observed, alternative)
    } else {
        approx_p(na, nb, rank_sum, &ties, alternative)
    };
    Ok(RankSumResult {
        rank_sum,
        u,
        p_value: p_value.clamp(0.0, 1.0),
        exact,
    })
}

fn exact_p(ranks: &[u64], nb: usize, observed: u64, alternative: Alternative) -> f64 {
    let max_sum: u64 = ranks.iter().sum();
    let width = max_sum as usize + 1;
    // ways[j][s]: subsets of size j with doubled rank sum s
    let mut ways = vec![vec![0u64; width]; nb + 1];
    ways[0][0] = 1;
    for (seen, &r) in ranks.iter().enumerate() {
        let r = r as usize;
        for j in (1..=nb.min(seen + 1)).rev() {
            let (lower, upper) = ways.split_at_mut(j);
            let (prev, cur) = (&lower[j - 1], &mut upper[0]);
            for s in (r..width).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let dist = &ways[nb];
    let all: u64 = dist.iter().sum();
    let n = ranks.len() as i64;
    let center = nb as i64 * (n + 1); // doubled expected rank sum
    let obs_dev = (observed as i64 - center).abs();
    let hits: u64 = dist
        .iter()
        .enumerate()
        .filter(|&(s, _)| match alternative {
            Alternative::BGreater => s as u64 >= observed,
            Alternative::TwoSided => (s as i64 - center).abs() >= obs_dev,
        })
        .map(|(_, &c)| c)
        .sum();
    hits as f64 / all as f64
}

fn approx_p(na: usize, nb: usize, rank_sum: f64, ties: &[u64], alternative: Alternative) -> f64 {
    let n = (na + nb) as f64;
    let mean = nb as f64 * (n + 1.0) / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = na as f64 * nb as f64 / 12.0 * ((n + 1.0) - if n > 1.0 { tie_term } else { 0.0 });
    if !(var > 0.0) {
        return 1.0;
    }
    let sd = var.sqrt();
    let diff = rank_sum - mean;
    match alternative {
        Alternative::BGreater => normal_sf((diff - 0.5) / sd),
        Alternative::TwoSided => (2.0 * normal_sf(((diff.abs() - 0.5).max(0.0)) / sd)).min(1.0),
    }
}

/// Cliff's delta of `b` over `a`: the share of cross pairs where `b` is
/// larger minus the share where it is smaller. Positive means `b` tends
/// larger.
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    check_sample(a)?;
    check_sample(b)?;
    let mut sorted = a.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut greater = 0u64;
    let mut less = 0u64;
    for &x in b {
        let below = sorted.partition_point(|&y| y < x);
        let at_or_below = sorted.partition_point(|&y| y <= x);
        greater += below as u64;
        less += (sorted.len() - at_or_below) as u64;
    }
    Ok((greater as f64 - less as f64) / (a.len() * b.len()) as f64)
}

pub fn median(xs: &[f64]) -> Result<f64, StatsError> {
    check_sample(xs)?;
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeverityBand {
    Excellent,
    Good,
    NoticeableLag,
    SevereLag,
}

impl SeverityBand {
    pub const ALL: [SeverityBand; 4] = [
        SeverityBand::Excellent,
        SeverityBand::Good,
        SeverityBand::NoticeableLag,
        SeverityBand::SevereLag,
    ];

    pub fn level(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            SeverityBand::Excellent => "Excellent",
            SeverityBand::Good => "Good",
            SeverityBand::NoticeableLag => "Noticeable Lag",
            SeverityBand::SevereLag => "Severe Lag",
        }
    }

    /// Bands crossed going from `self` to `to`; improvements count as 0.
    pub fn downgrade_to(self, to: SeverityBand) -> usize {
        to.level().saturating_sub(self.level())
    }
}

impl fmt::Display for SeverityBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Lower bounds of Good, NoticeableLag and SevereLag; Excellent starts at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeverityCuts(pub [f64; 3]);

impl SeverityCuts {
    pub fn default_for(metric: MetricKind) -> Self {
        match metric {
            MetricKind::ResponseTime => SeverityCuts([100.0, 300.0, 1000.0]),
            MetricKind::FinishTime | MetricKind::LaunchTime => SeverityCuts([1000.0, 3000.0, 5000.0]),
            MetricKind::DroppedFrames => SeverityCuts([3.0, 10.0, 30.0]),
        }
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        let c = self.0;
        if c.iter().all(|v| v.is_finite()) && 0.0 < c[0] && c[0] < c[1] && c[1] < c[2] {
            Ok(())
        } else {
            Err(StatsError::InvalidConfig(format!(
                "severity cut points must be positive and increasing, got {c:?}"
            )))
        }
    }
}

/// Band whose half-open interval `[lo, hi)` contains `value`.
pub fn classify_severity(value: f64, cuts: &SeverityCuts) -> SeverityBand {
    let idx = cuts.0.iter().take_while(|&&c| value >= c).count();
    SeverityBand::ALL[idx]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub metric: MetricKind,
    /// Smallest median increase users notice (ms, or frames).
    pub theta: f64,
    pub alpha: f64,
    pub delta_min: f64,
    pub min_runs: usize,
    pub severity: SeverityCuts,
}

impl MetricConfig {
    pub fn default_for(metric: MetricKind) -> Self {
        let theta = match metric {
            MetricKind::ResponseTime => 100.0,
            MetricKind::FinishTime | MetricKind::LaunchTime => 200.0,
            MetricKind::DroppedFrames => 3.0,
        };
        MetricConfig {
            metric,
            theta,
            alpha: 0.05,
            delta_min: 0.147,
            min_runs: DEFAULT_MIN_RUNS,
            severity: SeverityCuts::default_for(metric),
        }
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        let bad = |m: String| Err(StatsError::InvalidConfig(m));
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return bad(format!("{}: theta must be >= 0", self.metric));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("{}: alpha must lie in (0, 1)", self.metric));
        }
        if !(self.delta_min >= 0.0 && self.delta_min < 1.0) {
            return bad(format!("{}: delta_min must lie in [0, 1)", self.metric));
        }
        self.severity.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionVerdict {
    pub interaction_id: String,
    pub metric: MetricKind,
    pub p_value: f64,
    pub cliffs_delta: f64,
    pub median_base: f64,
    pub median_updated: f64,
    pub median_diff: f64,
    /// Perceptual threshold applied; 0 for the statistics-only detector.
    pub theta: f64,
    pub regressed: bool,
    pub severity_base: SeverityBand,
    pub severity_updated: SeverityBand,
    /// (base runs, updated runs)
    pub sample_sizes: (usize, usize),
}

impl RegressionVerdict {
    pub fn bands_crossed(&self) -> usize {
        self.severity_base.downgrade_to(self.severity_updated)
    }

    /// Median increase in units of the threshold (raw increase when θ = 0).
    /// Saturates instead of overflowing so reports stay finite.
    pub fn normalized_diff(&self) -> f64 {
        let d = if self.theta > 0.0 {
            self.median_diff / self.theta
        } else {
            self.median_diff
        };
        d.clamp(-f64::MAX, f64::MAX)
    }
}

struct Comparison {
    p_value: f64,
    delta: f64,
    median_base: f64,
    median_updated: f64,
}

fn compare(base: &MetricSamples, updated: &MetricSamples, cfg: &MetricConfig) -> Result<Comparison, StatsError> {
    cfg.validate()?;
    if base.metric != cfg.metric || updated.metric != cfg.metric {
        return Err(StatsError::MetricMismatch {
            config: cfg.metric,
            base: base.metric,
            updated: updated.metric,
        });
    }
    if base.interaction_id != updated.interaction_id {
        return Err(StatsError::InteractionMismatch(
            base.interaction_id.clone(),
            updated.interaction_id.clone(),
        ));
    }
    let min_runs = cfg.min_runs.max(1);
    for (which, s) in [("base", base), ("updated", updated)] {
        if s.values.len() < min_runs {
            return Err(StatsError::InsufficientRuns {
                which,
                got: s.values.len(),
                min_runs,
            });
        }
    }
    let test = wilcoxon_rank_sum(&base.values, &updated.values, RankSumMode::Auto, Alternative::BGreater)?;
    Ok(Comparison {
        p_value: test.p_value,
        delta: cliffs_delta(&base.values, &updated.values)?,
        median_base: median(&base.values)?,
        median_updated: median(&updated.values)?,
    })
}

fn verdict(base: &MetricSamples, updated: &MetricSamples, cfg: &MetricConfig, c: Comparison, theta: f64, regressed: bool) -> RegressionVerdict {
    RegressionVerdict {
        interaction_id: base.interaction_id.clone(),
        metric: cfg.metric,
        p_value: c.p_value,
        cliffs_delta: c.delta,
        median_base: c.median_base,
        median_updated: c.median_updated,
        median_diff: c.median_updated - c.median_base,
        theta,
        regressed,
        severity_base: classify_severity(c.median_base, &cfg.severity),
        severity_updated: classify_severity(c.median_updated, &cfg.severity),
        sample_sizes: (base.values.len(), updated.values.len()),
    }
}

/// Regressed when the updated sample is significantly larger (one-sided),
/// the effect is non-negligible, and the median grows by more than θ.
pub fn detect_regression(
    base: &MetricSamples,
    updated: &MetricSamples,
    cfg: &MetricConfig,
) -> Result<RegressionVerdict, StatsError> {
    let c = compare(base, updated, cfg)?;
    let regressed = c.p_value < cfg.alpha
        && c.delta >= cfg.delta_min
        && c.median_updated - c.median_base > cfg.theta;
    Ok(verdict(base, updated, cfg, c, cfg.theta, regressed))
}

/// Statistics-only detector (rank-sum plus Cliff's delta, no perceptual
/// threshold). Used as the reference method in evaluations.
pub fn baseline_detect(
    base: &MetricSamples,
    updated: &MetricSamples,
    cfg: &MetricConfig,
) -> Result<RegressionVerdict, StatsError> {
    let c = compare(base, updated, cfg)?;
    let regressed = c.p_value < cfg.alpha && c.delta >= cfg.delta_min;
    Ok(verdict(base, updated, cfg, c, 0.0, regressed))
}
