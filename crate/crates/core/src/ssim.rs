//! Structural similarity between consecutive frames, and location of the
//! response and finish frames of an interaction.
//!
//! SSIM is evaluated on a grid of square windows with uniform weights:
//!
//! ```text
//! SSIM(a, b) = (2 μa μb + C1)(2 σab + C2) / ((μa² + μb² + C1)(σa² + σb² + C2))
//! C1 = (k1 L)²,  C2 = (k2 L)²
//! ```
//!
//! and the frame score is the mean over all windows. Window sums are
//! accumulated in integers and windows are averaged in raster order, so a
//! score is bitwise reproducible whatever the surrounding parallelism.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Frame, Screencast};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SsimError {
    #[error("frames differ in size: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("frame {width}x{height} is smaller than the {window}px window")]
    FrameTooSmall {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("screencast has {0} frame(s); consecutive-frame similarity needs at least 2")]
    TooFewFrames(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no frame pair dropped below the change threshold")]
    NoVisualResponse,
    #[error("similarity series is empty")]
    EmptySeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsimParams {
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
    pub stride: usize,
    /// Box-filter downscale applied to both frames before comparison.
    /// Values above 1 trade accuracy for throughput.
    pub downscale: usize,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 8,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
            stride: 8,
            downscale: 1,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<(), SsimError> {
        let bad = |m: &str| Err(SsimError::InvalidParams(m.to_string()));
        if self.window < 2 {
            return bad("window must be at least 2");
        }
        if !(self.k1 > 0.0 && self.k1 < 1.0) || !(self.k2 > 0.0 && self.k2 < 1.0) {
            return bad("k1 and k2 must lie in (0, 1)");
        }
        if !(self.dynamic_range > 0.0) {
            return bad("dynamic_range must be positive");
        }
        if self.stride < 1 {
            return bad("stride must be at least 1");
        }
        if self.downscale < 1 {
            return bad("downscale must be at least 1");
        }
        Ok(())
    }

    fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

fn box_downscale(pixels: &[u8], width: usize, height: usize, factor: usize) -> (Vec<u8>, usize, usize) {
    let (w, h) = (width / factor, height / factor);
    let area = (factor * factor) as u32;
    let mut out = Vec::with_capacity(w * h);
    for by in 0..h {
        for bx in 0..w {
            let mut sum = 0u32;
            for y in by * factor..(by + 1) * factor {
                let row = &pixels[y * width + bx * factor..y * width + (bx + 1) * factor];
                sum += row.iter().map(|&v| u32::from(v)).sum::<u32>();
            }
            out.push(((sum + area / 2) / area) as u8);
        }
    }
    (out, w, h)
}

fn ssim_plane(a: &[u8], b: &[u8], width: usize, height: usize, p: &SsimParams) -> f64 {
    let (c1, c2) = (p.c1(), p.c2());
    let n = (p.window * p.window) as i64;
    let nf = n as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in (0..=height - p.window).step_by(p.stride) {
        for x0 in (0..=width - p.window).step_by(p.stride) {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0i64, 0i64, 0i64, 0i64, 0i64);
            for y in y0..y0 + p.window {
                let row = y * width;
                for x in x0..x0 + p.window {
                    let va = i64::from(a[row + x]);
                    let vb = i64::from(b[row + x]);
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            }
            let mu_a = sa as f64 / nf;
            let mu_b = sb as f64 / nf;
            let n2 = nf * nf;
            // population moments from exact integer numerators
            let var_a = (n * saa - sa * sa) as f64 / n2;
            let var_b = (n * sbb - sb * sb) as f64 / n2;
            let cov = (n * sab - sa * sb) as f64 / n2;
            let num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            total += num / den;
            count += 1;
        }
    }
    (total / count as f64).clamp(-1.0, 1.0)
}

/// Mean SSIM of two equally sized frames over the window grid.
pub fn ssim(a: &Frame, b: &Frame, p: &SsimParams) -> Result<f64, SsimError> {
    p.validate()?;
    if (a.width, a.height) != (b.width, b.height) {
        return Err(SsimError::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    if p.downscale > 1 {
        let (pa, w, h) = box_downscale(&a.pixels, a.width, a.height, p.downscale);
        let (pb, _, _) = box_downscale(&b.pixels, b.width, b.height, p.downscale);
        if w < p.window || h < p.window {
            return Err(SsimError::FrameTooSmall {
                width: w,
                height: h,
                window: p.window,
            });
        }
        return Ok(ssim_plane(&pa, &pb, w, h, p));
    }
    if a.width < p.window || a.height < p.window {
        return Err(SsimError::FrameTooSmall {
            width: a.width,
            height: a.height,
            window: p.window,
        });
    }
    Ok(ssim_plane(&a.pixels, &b.pixels, a.width, a.height, p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsimSeries {
    pub source: String,
    /// `values[i]` compares frames `i` and `i + 1`.
    pub values: Vec<f64>,
}

pub fn ssim_series(sc: &Screencast, p: &SsimParams) -> Result<SsimSeries, SsimError> {
    if sc.frames.len() < 2 {
        return Err(SsimError::TooFewFrames(sc.frames.len()));
    }
    let values = sc
        .frames
        .par_windows(2)
        .map(|w| ssim(&w[0], &w[1], p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SsimSeries {
        source: sc.id(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KeyFrameParams {
    /// A consecutive pair scoring below this counts as a visual change.
    pub drop_threshold: f64,
    /// Unchanged pairs that must follow the last change.
    pub stability_window: usize,
}

impl Default for KeyFrameParams {
    fn default() -> Self {
        KeyFrameParams {
            drop_threshold: 0.98,
            stability_window: 5,
        }
    }
}

impl KeyFrameParams {
    pub fn validate(&self) -> Result<(), SsimError> {
        if !(self.drop_threshold > 0.0 && self.drop_threshold < 1.0) {
            return Err(SsimError::InvalidParams("drop_threshold must lie in (0, 1)".into()));
        }
        if self.stability_window < 1 {
            return Err(SsimError::InvalidParams("stability_window must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinishFrame {
    pub index: usize,
    /// The screencast ended before the GUI settled.
    pub unstable_tail: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyFrames {
    pub start_index: usize,
    pub response_index: usize,
    pub finish_index: usize,
    pub unstable_tail: bool,
}

/// First frame that differs visibly from its predecessor.
pub fn detect_response_frame(series: &SsimSeries, kp: &KeyFrameParams) -> Result<usize, SsimError> {
    if series.values.is_empty() {
        return Err(SsimError::EmptySeries);
    }
    series
        .values
        .iter()
        .position(|&v| v < kp.drop_threshold)
        .map(|i| i + 1)
        .ok_or(SsimError::NoVisualResponse)
}

/// Frame after the last visible change that is followed by a stable run.
///
/// A change at pair `i` qualifies when the next `stability_window` pairs (or
/// all remaining pairs, when fewer are left, but at least one) are unchanged.
/// The latest qualifying change wins. When none qualifies, the last change is
/// used and the result carries `unstable_tail`.
pub fn detect_finish_frame(series: &SsimSeries, kp: &KeyFrameParams) -> Result<FinishFrame, SsimError> {
    let values = &series.values;
    if values.is_empty() {
        return Err(SsimError::EmptySeries);
    }
    let thr = kp.drop_threshold;
    let last_change = values
        .iter()
        .rposition(|&v| v < thr)
        .ok_or(SsimError::NoVisualResponse)?;

    let settled = |i: usize| {
        let after = &values[i + 1..values.len().min(i + 1 + kp.stability_window)];
        !after.is_empty() && after.iter().all(|&v| v >= thr)
    };
    let found = (0..=last_change).rev().find(|&i| values[i] < thr && settled(i));
    Ok(match found {
        Some(i) => FinishFrame {
            index: i + 1,
            unstable_tail: false,
        },
        None => FinishFrame {
            index: last_change + 1,
            unstable_tail: true,
        },
    })
}

pub fn detect_key_frames(series: &SsimSeries, kp: &KeyFrameParams) -> Result<KeyFrames, SsimError> {
    let response_index = detect_response_frame(series, kp)?;
    let finish = detect_finish_frame(series, kp)?;
    Ok(KeyFrames {
        start_index: 0,
        response_index,
        finish_index: finish.index,
        unstable_tail: finish.unstable_tail,
    })
}
