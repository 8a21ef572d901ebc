//! Adapter from container video files to the canonical frame layout, backed
//! by an external ffmpeg-compatible decoder.
//!
//! The decoder writes one RGB PPM per frame and logs per-frame timestamps
//! through the `showinfo` filter on stderr. The adapter converts each PPM to
//! Rec. 601 luma PGM and turns the log into `manifest.txt`.

use std::ffi::OsString;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::Command;

use super::{frame_file_name, write_manifest, write_pgm, CorpusError, MANIFEST_FILE};

/// Environment variable naming the decoder executable (default `ffmpeg`).
pub const DECODER_ENV: &str = "PERFCAST_DECODER";

const RAW_PATTERN: &str = "raw_%06d.ppm";

fn raw_name(index: usize) -> String {
    format!("raw_{index:06}.ppm")
}

/// Decode `video_path` into `out_dir` using the decoder named by
/// [`DECODER_ENV`]. Returns `out_dir`.
pub fn decode_container(video_path: &Path, out_dir: &Path) -> Result<PathBuf, CorpusError> {
    let decoder = std::env::var_os(DECODER_ENV).unwrap_or_else(|| OsString::from("ffmpeg"));
    decode_container_with(Path::new(&decoder), video_path, out_dir)
}

pub fn decode_container_with(
    decoder: &Path,
    video_path: &Path,
    out_dir: &Path,
) -> Result<PathBuf, CorpusError> {
    let len = fs::metadata(video_path).map_err(|e| CorpusError::io(video_path, e))?.len();
    if len == 0 {
        return Err(CorpusError::DecodeFailed(format!("{} is empty", video_path.display())));
    }
    fs::create_dir_all(out_dir).map_err(|e| CorpusError::io(out_dir, e))?;
    let output = Command::new(decoder)
        .args(["-hide_banner", "-nostdin", "-loglevel", "info", "-i"])
        .arg(video_path)
        .args([
            "-vf",
            "showinfo",
            "-fps_mode",
            "passthrough",
            "-pix_fmt",
            "rgb24",
            "-start_number",
            "0",
            "-f",
            "image2",
        ])
        .arg(out_dir.join(RAW_PATTERN))
        .output()
        .map_err(|e| match e.kind() {
            ErrorKind::NotFound | ErrorKind::PermissionDenied => {
                CorpusError::DecoderUnavailable(format!("{}: {e}", decoder.display()))
            }
            _ => CorpusError::DecodeFailed(format!("spawning {}: {e}", decoder.display())),
        })?;

    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        let tail: Vec<&str> = stderr.lines().rev().take(5).collect();
        return Err(CorpusError::DecodeFailed(format!(
            "decoder exited with {}: {}",
            output.status,
            tail.into_iter().rev().collect::<Vec<_>>().join(" | ")
        )));
    }

    let log = String::from_utf8_lossy(&output.stderr);
    let pts = parse_showinfo_log(&log);
    if pts.is_empty() {
        return Err(CorpusError::DecodeFailed("decoder produced no frames".into()));
    }

    for index in 0..pts.len() {
        let raw = out_dir.join(raw_name(index));
        if !raw.exists() {
            return Err(CorpusError::DecodeFailed(format!(
                "timestamp log lists {} frames but {} is missing",
                pts.len(),
                raw.display()
            )));
        }
        let (w, h, luma) = super::read_pgm(&raw)?;
        write_pgm(&out_dir.join(frame_file_name(index)), w, h, &luma)?;
        fs::remove_file(&raw).map_err(|e| CorpusError::io(&raw, e))?;
    }
    write_manifest(&out_dir.join(MANIFEST_FILE), pts)?;
    Ok(out_dir.to_path_buf())
}

/// Extract `pts_time` (seconds) from `showinfo` lines, ordered by the frame
/// number `n`, and convert to milliseconds.
pub fn parse_showinfo_log(log: &str) -> Vec<f64> {
    let mut frames: Vec<(usize, f64)> = log
        .lines()
        .filter(|l| l.contains("showinfo"))
        .filter_map(|l| {
            let n = field_after(l, "n:")?.parse::<usize>().ok()?;
            let t = field_after(l, "pts_time:")?.parse::<f64>().ok()?;
            Some((n, t * 1000.0))
        })
        .collect();
    frames.sort_by_key(|&(n, _)| n);
    frames.dedup_by_key(|&mut (n, _)| n);
    frames.into_iter().map(|(_, ms)| ms).collect()
}

fn field_after<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    // `n:` must not match inside another key such as `pts_time:` or `pos:`
    let mut search = line;
    loop {
        let at = search.find(key)?;
        let preceded_ok = at == 0 || !search.as_bytes()[at - 1].is_ascii_alphanumeric() && search.as_bytes()[at - 1] != b'_';
        let rest = &search[at + key.len()..];
        if preceded_ok {
            return rest.split_whitespace().next();
        }
        search = rest;
    }
}
