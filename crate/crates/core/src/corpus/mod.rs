//! Screencast corpora on disk.
//!
//! A screencast is one user interaction: the recorded frames (8-bit grayscale)
//! with their presentation timestamps, plus the metadata describing the
//! action that triggered it. The canonical layout is
//!
//! ```text
//! corpus_root/<os_version>/<app_id>/<scenario_id>/<interaction_id>/run_<k>/
//!     meta.json
//!     manifest.txt        "<index> <pts_ms>" per line
//!     frame_000000.pgm    binary PGM, one per manifest line
//! ```

mod decode;
mod pgm;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use decode::{decode_container, decode_container_with, parse_showinfo_log, DECODER_ENV};
pub use pgm::{luma_601, read_pgm, write_pgm};

/// Default number of runs recorded per OS version.
pub const DEFAULT_RUNS_PER_VERSION: u32 = 20;
/// Default display refresh rate.
pub const DEFAULT_REFRESH_HZ: f64 = 60.0;
/// Fewest frames for which consecutive-frame SSIM is defined.
pub const MIN_FRAMES: usize = 2;

pub const META_FILE: &str = "meta.json";
pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("frame {index} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        index: usize,
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("presentation timestamps not strictly increasing at frame {index} ({prev} -> {next} ms)")]
    NonMonotonicPts { index: usize, prev: f64, next: f64 },
    #[error("malformed metadata {path}: {reason}")]
    MalformedMetadata { path: PathBuf, reason: String },
    #[error("malformed manifest {path}, line {line}: {reason}")]
    MalformedManifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("malformed frame image {path}: {reason}")]
    MalformedFrame { path: PathBuf, reason: String },
    #[error("video decoder unavailable: {0}")]
    DecoderUnavailable(String),
    #[error("decoding failed: {0}")]
    DecodeFailed(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            CorpusError::MissingFile(path.to_path_buf())
        } else {
            CorpusError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }
}

/// One grayscale frame with its presentation timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub pts_ms: f64,
    pub width: usize,
    pub height: usize,
    /// Row-major intensities, `width * height` long.
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(index: usize, pts_ms: f64, width: usize, height: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer does not match dimensions");
        Frame {
            index,
            pts_ms,
            width,
            height,
            pixels,
        }
    }

    /// A frame filled with a single intensity.
    pub fn filled(index: usize, pts_ms: f64, width: usize, height: usize, value: u8) -> Self {
        Frame::new(index, pts_ms, width, height, vec![value; width * height])
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionType {
    Tap,
    Scroll,
    Swipe,
    Draw,
    Launch,
}

impl ActionType {
    pub const ALL: [ActionType; 5] = [
        ActionType::Tap,
        ActionType::Scroll,
        ActionType::Swipe,
        ActionType::Draw,
        ActionType::Launch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionType::Tap => "tap",
            ActionType::Scroll => "scroll",
            ActionType::Swipe => "swipe",
            ActionType::Draw => "draw",
            ActionType::Launch => "launch",
        }
    }

    pub fn is_launch(self) -> bool {
        self == ActionType::Launch
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionMeta {
    pub app_id: String,
    pub scenario_id: String,
    pub interaction_id: String,
    pub action_type: ActionType,
    pub action_x: Option<f64>,
    pub action_y: Option<f64>,
    pub action_timestamp_ms: f64,
    pub os_version: String,
    pub run_index: u32,
    #[serde(default = "default_refresh")]
    pub device_refresh_hz: f64,
}

fn default_refresh() -> f64 {
    DEFAULT_REFRESH_HZ
}

#[derive(Debug, Clone, PartialEq)]
pub struct Screencast {
    pub meta: InteractionMeta,
    pub frames: Vec<Frame>,
}

impl Screencast {
    /// `<os_version>/<interaction_id>/run_<k>`, unique within a corpus.
    pub fn id(&self) -> String {
        format!(
            "{}/{}/run_{}",
            self.meta.os_version, self.meta.interaction_id, self.meta.run_index
        )
    }

    pub fn pts(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.pts_ms).collect()
    }

    pub fn dimensions(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|f| (f.width, f.height))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    TooFewFrames,
    NonMonotonicPts,
    DimensionMismatch,
    FrameIndexOrder,
    RunIndexRange,
    LaunchCoordinates,
    MissingCoordinates,
    RefreshRate,
    EmptyIdentifier,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::TooFewFrames => "TOO_FEW_FRAMES",
            ViolationCode::NonMonotonicPts => "NON_MONOTONIC_PTS",
            ViolationCode::DimensionMismatch => "DIMENSION_MISMATCH",
            ViolationCode::FrameIndexOrder => "FRAME_INDEX_ORDER",
            ViolationCode::RunIndexRange => "RUN_INDEX_RANGE",
            ViolationCode::LaunchCoordinates => "LAUNCH_COORDINATES",
            ViolationCode::MissingCoordinates => "MISSING_COORDINATES",
            ViolationCode::RefreshRate => "REFRESH_RATE",
            ViolationCode::EmptyIdentifier => "EMPTY_IDENTIFIER",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub screencast_id: String,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_accepted(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

/// Check every screencast invariant and list the ones that fail.
pub fn validate_screencast(sc: &Screencast, runs_per_version: u32) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |code, message: String| violations.push(Violation { code, message });
    let meta = &sc.meta;

    if sc.frames.len() < MIN_FRAMES {
        push(
            ViolationCode::TooFewFrames,
            format!("{} frame(s), at least {MIN_FRAMES} required", sc.frames.len()),
        );
    }
    if let Some(first) = sc.frames.first() {
        for (i, f) in sc.frames.iter().enumerate() {
            if f.index != i {
                push(
                    ViolationCode::FrameIndexOrder,
                    format!("frame at position {i} carries index {}", f.index),
                );
            }
            if f.width != first.width || f.height != first.height || f.pixels.len() != f.width * f.height {
                push(
                    ViolationCode::DimensionMismatch,
                    format!(
                        "frame {i} is {}x{}, expected {}x{}",
                        f.width, f.height, first.width, first.height
                    ),
                );
            }
        }
        for (i, w) in sc.frames.windows(2).enumerate() {
            if !(w[1].pts_ms > w[0].pts_ms) {
                push(
                    ViolationCode::NonMonotonicPts,
                    format!("pts {} -> {} at frame {}", w[0].pts_ms, w[1].pts_ms, i + 1),
                );
            }
        }
    }
    if meta.run_index >= runs_per_version {
        push(
            ViolationCode::RunIndexRange,
            format!("run_index {} outside [0, {})", meta.run_index, runs_per_version),
        );
    }
    let has_coords = meta.action_x.is_some() || meta.action_y.is_some();
    if meta.action_type.is_launch() && has_coords {
        push(
            ViolationCode::LaunchCoordinates,
            "launch interactions carry no action coordinates".to_string(),
        );
    }
    if !meta.action_type.is_launch() && (meta.action_x.is_none() || meta.action_y.is_none()) {
        push(
            ViolationCode::MissingCoordinates,
            format!("{} interaction without action coordinates", meta.action_type),
        );
    }
    if !(meta.device_refresh_hz > 0.0 && meta.device_refresh_hz.is_finite()) {
        push(
            ViolationCode::RefreshRate,
            format!("device_refresh_hz {} is not positive", meta.device_refresh_hz),
        );
    }
    for (name, value) in [
        ("app_id", &meta.app_id),
        ("scenario_id", &meta.scenario_id),
        ("interaction_id", &meta.interaction_id),
        ("os_version", &meta.os_version),
    ] {
        if value.is_empty() {
            push(ViolationCode::EmptyIdentifier, format!("{name} is empty"));
        }
    }

    ValidationReport {
        screencast_id: sc.id(),
        violations,
    }
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.pgm")
}

/// Relative directory of a screencast inside a corpus root.
pub fn screencast_rel_dir(meta: &InteractionMeta) -> PathBuf {
    PathBuf::from(&meta.os_version)
        .join(&meta.app_id)
        .join(&meta.scenario_id)
        .join(&meta.interaction_id)
        .join(format!("run_{}", meta.run_index))
}

fn parse_manifest(path: &Path) -> Result<Vec<(usize, f64)>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |reason: &str| CorpusError::MalformedManifest {
            path: path.to_path_buf(),
            line: lineno + 1,
            reason: reason.to_string(),
        };
        let mut parts = line.split_whitespace();
        let index = parts
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| bad("expected a frame index"))?;
        let pts = parts
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|p| p.is_finite())
            .ok_or_else(|| bad("expected a timestamp in milliseconds"))?;
        if parts.next().is_some() {
            return Err(bad("trailing fields"));
        }
        if index != entries.len() {
            return Err(bad("frame indices must be consecutive from 0"));
        }
        entries.push((index, pts));
    }
    Ok(entries)
}

pub fn read_meta(path: &Path) -> Result<InteractionMeta, CorpusError> {
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CorpusError::MalformedMetadata {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Load one screencast directory (`run_<k>/`).
pub fn load_screencast(dir: &Path) -> Result<Screencast, CorpusError> {
    let meta = read_meta(&dir.join(META_FILE))?;
    let manifest = parse_manifest(&dir.join(MANIFEST_FILE))?;

    let mut frames: Vec<Frame> = Vec::with_capacity(manifest.len());
    for (index, pts_ms) in manifest {
        if let Some(prev) = frames.last() {
            if !(pts_ms > prev.pts_ms) {
                return Err(CorpusError::NonMonotonicPts {
                    index,
                    prev: prev.pts_ms,
                    next: pts_ms,
                });
            }
        }
        let path = dir.join(frame_file_name(index));
        let (width, height, pixels) = read_pgm(&path)?;
        if let Some(first) = frames.first() {
            if (width, height) != (first.width, first.height) {
                return Err(CorpusError::DimensionMismatch {
                    index,
                    want_w: first.width,
                    want_h: first.height,
                    got_w: width,
                    got_h: height,
                });
            }
        }
        frames.push(Frame::new(index, pts_ms, width, height, pixels));
    }
    Ok(Screencast { meta, frames })
}

pub fn write_meta(path: &Path, meta: &InteractionMeta) -> Result<(), CorpusError> {
    let mut text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CorpusError::io(path, e))
}

pub fn write_manifest(path: &Path, pts: impl IntoIterator<Item = f64>) -> Result<(), CorpusError> {
    let mut text = String::new();
    for (i, p) in pts.into_iter().enumerate() {
        text.push_str(&format!("{i} {p:.6}\n"));
    }
    fs::write(path, text).map_err(|e| CorpusError::io(path, e))
}

/// Write a screencast into `dir` using the canonical layout. Timestamps are
/// written with six decimals.
pub fn write_screencast(sc: &Screencast, dir: &Path) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
    write_meta(&dir.join(META_FILE), &sc.meta)?;
    write_manifest(&dir.join(MANIFEST_FILE), sc.frames.iter().map(|f| f.pts_ms))?;
    for (i, f) in sc.frames.iter().enumerate() {
        write_pgm(&dir.join(frame_file_name(i)), f.width, f.height, &f.pixels)?;
    }
    Ok(())
}

/// Every screencast directory for `os_version` under a corpus root, in
/// sorted path order.
pub fn discover_screencasts(corpus_root: &Path, os_version: &str) -> Result<Vec<PathBuf>, CorpusError> {
    let version_root = corpus_root.join(os_version);
    if !version_root.is_dir() {
        return Err(CorpusError::MissingFile(version_root));
    }
    let mut dirs = Vec::new();
    for entry in walkdir::WalkDir::new(&version_root)
        .min_depth(4)
        .max_depth(4)
        .sort_by_file_name()
    {
        let entry = entry.map_err(|e| CorpusError::Io {
            path: version_root.clone(),
            source: e.into(),
        })?;
        if entry.file_type().is_dir() && entry.file_name().to_string_lossy().starts_with("run_") {
            dirs.push(entry.into_path());
        }
    }
    Ok(dirs)
}
