use serde::{Deserialize, Serialize};

use crate::error::{Result, RvqError};
use crate::window::Window;

/// Envelope values below this are treated as this value during overlap-add.
pub const ENVELOPE_FLOOR: f64 = 1e-8;
const COLA_TOL: f64 = 1e-6;

/// Analysis/synthesis framing parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrameSpec", into = "FrameSpec")]
pub struct FrameConfig {
    frame_len: usize,
    hop: usize,
    window: Window,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FrameSpec {
    frame_len: usize,
    hop: usize,
    window: Window,
}

impl From<FrameConfig> for FrameSpec {
    fn from(c: FrameConfig) -> Self {
        Self {
            frame_len: c.frame_len,
            hop: c.hop,
            window: c.window,
        }
    }
}

impl TryFrom<FrameSpec> for FrameConfig {
    type Error = RvqError;

    fn try_from(s: FrameSpec) -> Result<Self> {
        FrameConfig::new(s.frame_len, s.hop, s.window)
    }
}

impl FrameConfig {
    /// Accepts a window/hop pair when either the shifted windows or their
    /// squares sum to a constant.
    pub fn new(frame_len: usize, hop: usize, window: Window) -> Result<Self> {
        if frame_len == 0 || hop == 0 || hop > frame_len {
            return Err(RvqError::arg(format!(
                "need 0 < hop <= frame_len, got hop {hop} and frame_len {frame_len}"
            )));
        }
        let coeffs = window.coefficients(frame_len);
        let squares: Vec<f64> = coeffs.iter().map(|w| w * w).collect();
        if !is_constant_overlap(&coeffs, hop) && !is_constant_overlap(&squares, hop) {
            return Err(RvqError::arg(format!(
                "{window} window of length {frame_len} does not overlap-add to a constant at hop {hop}"
            )));
        }
        Ok(Self {
            frame_len,
            hop,
            window,
            coeffs,
        })
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// Number of frames covering `len` samples, the last one zero-padded.
    pub fn n_frames(&self, len: usize) -> usize {
        if len <= self.frame_len {
            1
        } else {
            1 + (len - self.frame_len).div_ceil(self.hop)
        }
    }
}

fn is_constant_overlap(w: &[f64], hop: usize) -> bool {
    let sums: Vec<f64> = (0..hop)
        .map(|n| w.iter().skip(n).step_by(hop).sum())
        .collect();
    let reference = sums[0].max(f64::MIN_POSITIVE);
    sums.iter()
        .all(|s| (s - sums[0]).abs() <= COLA_TOL * reference)
        && sums[0] > 0.0
}

/// Windowed frames at hop offsets.
pub fn frame_signal(signal: &[f64], cfg: &FrameConfig) -> Result<Vec<Vec<f64>>> {
    if signal.len() < cfg.frame_len {
        return Err(RvqError::arg(format!(
            "signal of {} samples is shorter than one frame ({})",
            signal.len(),
            cfg.frame_len
        )));
    }
    Ok((0..cfg.n_frames(signal.len()))
        .map(|t| {
            let start = t * cfg.hop;
            (0..cfg.frame_len)
                .map(|i| signal.get(start + i).copied().unwrap_or(0.0) * cfg.coeffs[i])
                .collect()
        })
        .collect())
}

/// Weighted overlap-add, divided by the summed squared window.
pub fn overlap_add(frames: &[Vec<f64>], cfg: &FrameConfig, out_len: usize) -> Result<Vec<f64>> {
    if let Some(t) = frames.iter().position(|f| f.len() != cfg.frame_len) {
        return Err(RvqError::arg(format!(
            "frame {t} has {} samples, expected {}",
            frames[t].len(),
            cfg.frame_len
        )));
    }
    let mut out = vec![0.0; out_len];
    let mut env = vec![0.0; out_len];
    for (t, frame) in frames.iter().enumerate() {
        let start = t * cfg.hop;
        for (i, (&v, &w)) in frame.iter().zip(&cfg.coeffs).enumerate() {
            let Some(pos) = start.checked_add(i).filter(|&p| p < out_len) else {
                break;
            };
            out[pos] += v * w;
            env[pos] += w * w;
        }
    }
    for (o, e) in out.iter_mut().zip(&env) {
        *o /= e.max(ENVELOPE_FLOOR);
    }
    Ok(out)
}
