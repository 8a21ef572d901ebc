//! Argument parsing and subcommand dispatch.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use perfcast_core::corpus::decode_container;
use perfcast_core::report::{emit_report, parse_report, ReportFormat};
use perfcast_core::synth::{generate_paired_corpus, CorpusSpec, GroundTruth, GROUND_TRUTH_FILE};
use perfcast_core::{Decision, MetricKind};

use crate::config::{Overrides, ToolConfig};
use crate::pipeline::{compare_records, evaluate_corpus, extract_corpus, format_accuracy, read_metrics, write_metrics, Detector};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FATAL: u8 = 1;
pub const EXIT_PARTIAL: u8 = 2;
pub const EXIT_GATE_FAIL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "perfcast", version, about = "GUI performance metrics from screencasts and release regression gating")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Largest regression rate that passes the gate, in [0, 1]
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Significance level for every metric
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, value_name = "MS")]
    pub theta_response_time: Option<f64>,
    #[arg(long, global = true, value_name = "MS")]
    pub theta_finish_time: Option<f64>,
    #[arg(long, global = true, value_name = "MS")]
    pub theta_launch_time: Option<f64>,
    #[arg(long, global = true, value_name = "FRAMES")]
    pub theta_dropped_frames: Option<f64>,
    /// Fraction of a vsync period a frame gap may overrun before it counts
    #[arg(long, global = true)]
    pub gap_tolerance: Option<f64>,
    #[arg(long, global = true)]
    pub min_runs: Option<usize>,
    /// Worker threads (0 = all cores)
    #[arg(long, short = 'j', global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Html,
    /// JSON at the output path plus HTML next to it
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract per-screencast metrics for one OS version as JSON lines
    Extract {
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        #[arg(long)]
        os_version: String,
        #[arg(long, short, value_name = "FILE")]
        out: PathBuf,
    },
    /// Compare two metrics files and apply the release gate
    Compare {
        #[arg(long, value_name = "FILE")]
        base: PathBuf,
        #[arg(long, value_name = "FILE")]
        updated: PathBuf,
        #[arg(long, short, value_name = "FILE")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
        /// Use the statistics-only detector (no perceptual threshold)
        #[arg(long)]
        baseline: bool,
    },
    /// Re-render a structured report
    Report {
        #[arg(long, short, value_name = "FILE")]
        input: PathBuf,
        #[arg(long, short, value_name = "FILE")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "html")]
        format: OutputFormat,
    },
    /// Generate a labelled paired corpus from a TOML description
    Synth {
        #[arg(long, value_name = "FILE")]
        spec: PathBuf,
        #[arg(long, short, value_name = "DIR")]
        out: PathBuf,
    },
    /// Score extraction and detection on a generated corpus
    Eval {
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        /// Defaults to ground_truth.json in the corpus root
        #[arg(long, value_name = "FILE")]
        truth: Option<PathBuf>,
        #[arg(long, short, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Decode a container video into the frame layout with an external decoder
    Decode {
        #[arg(long, value_name = "FILE")]
        video: PathBuf,
        #[arg(long, short, value_name = "DIR")]
        out: PathBuf,
    },
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        let mut o = Overrides {
            tolerance: self.tolerance,
            alpha: self.alpha,
            jobs: self.jobs,
            gap_tolerance: self.gap_tolerance,
            min_runs: self.min_runs,
            ..Default::default()
        };
        for (m, v) in [
            (MetricKind::ResponseTime, self.theta_response_time),
            (MetricKind::FinishTime, self.theta_finish_time),
            (MetricKind::LaunchTime, self.theta_launch_time),
            (MetricKind::DroppedFrames, self.theta_dropped_frames),
        ] {
            if let Some(v) = v {
                o.theta.insert(m, v);
            }
        }
        o
    }

    pub fn resolve(&self) -> Result<ToolConfig> {
        let mut cfg = ToolConfig::load(self.config.as_deref())?;
        cfg.apply(&self.overrides())?;
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> ExitCode {
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    let cfg = cli.global.resolve()?;
    match cli.command {
        Command::Extract { corpus, os_version, out } => cmd_extract(&corpus, &os_version, &cfg, &out),
        Command::Compare {
            base,
            updated,
            out,
            format,
            baseline,
        } => {
            let detector = if baseline { Detector::Baseline } else { Detector::Perceptual };
            cmd_compare(&base, &updated, &cfg, &out, format, detector)
        }
        Command::Report { input, out, format } => {
            let report = parse_report(&input)?;
            write_report(&report, &out, format)?;
            Ok(EXIT_OK)
        }
        Command::Synth { spec, out } => cmd_synth(&spec, &out, &cfg),
        Command::Eval { corpus, truth, out } => cmd_eval(&corpus, truth.as_deref(), &cfg, out.as_deref()),
        Command::Decode { video, out } => {
            decode_container(&video, &out)?;
            println!("decoded {} into {}", video.display(), out.display());
            Ok(EXIT_OK)
        }
    }
}

pub fn cmd_extract(corpus: &Path, os_version: &str, cfg: &ToolConfig, out: &Path) -> Result<u8> {
    let outcome = extract_corpus(corpus, os_version, cfg)?;
    for f in &outcome.failures {
        eprintln!("warning: {}: {}", f.path, f.reason);
    }
    write_metrics(out, &outcome.records)?;
    let no_response = outcome
        .records
        .iter()
        .filter(|r| r.has_flag(perfcast_core::MetricFlag::NoVisualResponse))
        .count();
    println!(
        "extracted {} screencast(s) for {os_version}; {} failed; {no_response} without visual response",
        outcome.records.len(),
        outcome.failures.len()
    );
    Ok(if outcome.failures.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
}

fn write_report(report: &perfcast_core::ReleaseReport, out: &Path, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Json => {
            emit_report(report, ReportFormat::Structured, out)?;
        }
        OutputFormat::Html => {
            emit_report(report, ReportFormat::Html, out)?;
        }
        OutputFormat::Both => {
            emit_report(report, ReportFormat::Structured, out)?;
            emit_report(report, ReportFormat::Html, &out.with_extension("html"))?;
        }
    }
    Ok(())
}

pub fn cmd_compare(
    base: &Path,
    updated: &Path,
    cfg: &ToolConfig,
    out: &Path,
    format: OutputFormat,
    detector: Detector,
) -> Result<u8> {
    let b = read_metrics(base)?;
    let u = read_metrics(updated)?;
    let report = compare_records(&b, &u, cfg, detector)?;
    for e in &report.excluded {
        let metric = e.metric.map(|m| format!(" {m}")).unwrap_or_default();
        eprintln!("warning: excluded {}{metric}: {}", e.interaction_id, e.reason);
    }
    write_report(&report, out, format)?;
    println!(
        "{} -> {}: {}/{} interactions regressed ({:.2}%), tolerance {:.2}%: {}",
        report.base_version,
        report.updated_version,
        report.regressed_count(),
        report.comparisons.len(),
        report.regression_rate * 100.0,
        report.tolerance * 100.0,
        match report.decision {
            Decision::Pass => "PASS",
            Decision::Fail => "FAIL",
        }
    );
    Ok(match report.decision {
        Decision::Pass => EXIT_OK,
        Decision::Fail => EXIT_GATE_FAIL,
    })
}

pub fn cmd_synth(spec_path: &Path, out: &Path, cfg: &ToolConfig) -> Result<u8> {
    let text = std::fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let spec: CorpusSpec = toml::from_str(&text).with_context(|| format!("invalid corpus spec {}", spec_path.display()))?;
    let truth = cfg.thread_pool()?.install(|| generate_paired_corpus(&spec, cfg.min_runs, out))?;
    println!(
        "wrote {} screencast(s) for {} interaction(s) to {}",
        truth.screencasts.len(),
        spec.interactions.len(),
        out.display()
    );
    Ok(EXIT_OK)
}

pub fn cmd_eval(corpus: &Path, truth: Option<&Path>, cfg: &ToolConfig, out: Option<&Path>) -> Result<u8> {
    let truth_path = truth.map_or_else(|| corpus.join(GROUND_TRUTH_FILE), Path::to_path_buf);
    let truth = GroundTruth::read(&truth_path)?;
    let (acc, failures) = evaluate_corpus(corpus, &truth, cfg)?;
    for f in &failures {
        eprintln!("warning: {}: {}", f.path, f.reason);
    }
    print!("{}", format_accuracy(&acc));
    if let Some(out) = out {
        let mut text = serde_json::to_string_pretty(&acc)?;
        text.push('\n');
        std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(EXIT_OK)
}
