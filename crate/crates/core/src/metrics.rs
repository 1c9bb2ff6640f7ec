//! Distances, SI-SNR, log-mel spectral distance and confidence intervals.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RvqError};
use crate::window::Window;

/// Reported SI-SNR values are clamped to `[-SI_SNR_CAP_DB, SI_SNR_CAP_DB]`.
pub const SI_SNR_CAP_DB: f64 = 120.0;

/// z-value of a two-sided 95% normal interval.
pub const Z_95: f64 = 1.96;

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared Euclidean distance.
pub fn sq_l2(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(RvqError::arg(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(sq_dist(x, y))
}

pub fn l2(x: &[f64], y: &[f64]) -> Result<f64> {
    sq_l2(x, y).map(f64::sqrt)
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn zero_mean(x: &[f64]) -> Vec<f64> {
    let mean = compensated_sum(x.iter().copied()) / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

/// Scale-invariant SNR of `estimate` against `target`, in dB.
///
/// Both signals are made zero-mean, the estimate is projected onto the target,
/// and the ratio of projected to residual energy is returned. The result is
/// clamped to +/-120 dB so perfect or orthogonal matches stay finite.
pub fn si_snr(target: &[f64], estimate: &[f64]) -> Result<f64> {
    if target.len() != estimate.len() {
        return Err(RvqError::arg(format!(
            "length mismatch: {} vs {}",
            target.len(),
            estimate.len()
        )));
    }
    if target.is_empty() {
        return Err(RvqError::arg("signals must not be empty"));
    }
    let t = zero_mean(target);
    let e = zero_mean(estimate);
    let tt = dot(&t, &t);
    if tt == 0.0 {
        return Err(RvqError::arg("target is all-zero after mean removal"));
    }
    let alpha = dot(&e, &t) / tt;
    let s: Vec<f64> = t.iter().map(|v| alpha * v).collect();
    let noise: f64 = e.iter().zip(&s).map(|(a, b)| (a - b) * (a - b)).sum();
    let signal = dot(&s, &s);
    if noise == 0.0 {
        return Ok(SI_SNR_CAP_DB);
    }
    Ok((10.0 * (signal / noise).log10()).clamp(-SI_SNR_CAP_DB, SI_SNR_CAP_DB))
}

/// STFT and mel filterbank settings for the spectral distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub window: Window,
    pub sample_rate: u32,
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            fft_size: 1024,
            hop: 256,
            n_mels: 80,
            window: Window::Hann,
            sample_rate: 24_000,
            log_floor: 1e-5,
        }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 2 {
            return Err(RvqError::arg("fft_size must be at least 2"));
        }
        if self.hop == 0 || self.hop > self.fft_size {
            return Err(RvqError::arg(format!(
                "hop {} must be in [1, fft_size = {}]",
                self.hop, self.fft_size
            )));
        }
        if self.n_mels == 0 {
            return Err(RvqError::arg("n_mels must be at least 1"));
        }
        if self.sample_rate == 0 {
            return Err(RvqError::arg("sample rate must be positive"));
        }
        if !(self.log_floor > 0.0) {
            return Err(RvqError::arg("log_floor must be positive"));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }
}

fn reflect_pad(signal: &[f64], pad: usize) -> Vec<f64> {
    let n = signal.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    out.extend((1..=pad).rev().map(|i| signal[i]));
    out.extend_from_slice(signal);
    out.extend((0..pad).map(|i| signal[n - 2 - i]));
    out
}

struct Stft {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
}

impl Stft {
    fn new(cfg: &MelConfig) -> Self {
        Self {
            fft: FftPlanner::new().plan_fft_forward(cfg.fft_size),
            window: cfg.window.coefficients(cfg.fft_size),
        }
    }

    fn magnitudes(&self, frame: &[f64], buf: &mut Vec<Complex<f64>>) -> Vec<f64> {
        buf.clear();
        buf.extend(
            frame
                .iter()
                .zip(&self.window)
                .map(|(x, w)| Complex::new(x * w, 0.0)),
        );
        self.fft.process(buf);
        buf[..frame.len() / 2 + 1]
            .iter()
            .map(|c| c.norm())
            .collect()
    }
}

/// Magnitude STFT, one row per frame, `fft_size / 2 + 1` columns.
///
/// Frames are centred: the signal is reflect-padded by `fft_size / 2` on both
/// sides, giving `1 + len / hop` frames.
pub fn stft_mag(signal: &[f64], cfg: &MelConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    if signal.len() < cfg.fft_size {
        return Err(RvqError::arg(format!(
            "signal of {} samples is shorter than fft_size {}",
            signal.len(),
            cfg.fft_size
        )));
    }
    let padded = reflect_pad(signal, cfg.fft_size / 2);
    let n_frames = 1 + signal.len() / cfg.hop;
    let stft = Stft::new(cfg);
    let mut buf = Vec::with_capacity(cfg.fft_size);
    Ok((0..n_frames)
        .map(|t| {
            let start = t * cfg.hop;
            stft.magnitudes(&padded[start..start + cfg.fft_size], &mut buf)
        })
        .collect())
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// The `n_mels + 2` band edges in Hz, uniformly spaced in mel from 0 to Nyquist.
pub fn mel_band_edges_hz(cfg: &MelConfig) -> Vec<f64> {
    let top = hz_to_mel(cfg.sample_rate as f64 / 2.0);
    let n = cfg.n_mels + 1;
    (0..=n)
        .map(|i| mel_to_hz(top * i as f64 / n as f64))
        .collect()
}

/// Triangular mel filters, `n_mels` rows by `fft_size / 2 + 1` columns.
///
/// Each triangle is scaled by `2 / (f_hi - f_lo)` so filters have equal area.
pub fn mel_filterbank(cfg: &MelConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let edges = mel_band_edges_hz(cfg);
    let bin_hz = cfg.sample_rate as f64 / cfg.fft_size as f64;
    Ok((0..cfg.n_mels)
        .map(|m| {
            let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let norm = 2.0 / (hi - lo);
            (0..cfg.n_bins())
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    let rising = (f - lo) / (center - lo);
                    let falling = (hi - f) / (hi - center);
                    rising.min(falling).max(0.0) * norm
                })
                .collect()
        })
        .collect())
}

/// `ln(mel · |STFT| + log_floor)`, one row per frame.
pub fn log_mel_spectrogram(signal: &[f64], cfg: &MelConfig) -> Result<Vec<Vec<f64>>> {
    let fb = mel_filterbank(cfg)?;
    let spec = stft_mag(signal, cfg)?;
    Ok(log_mel_from(&fb, &spec, cfg.log_floor))
}

fn log_mel_from(fb: &[Vec<f64>], spec: &[Vec<f64>], floor: f64) -> Vec<Vec<f64>> {
    spec.iter()
        .map(|frame| {
            fb.iter()
                .map(|row| (dot(row, frame) + floor).ln())
                .collect()
        })
        .collect()
}

/// Mean absolute difference between the log-mel spectrograms of `a` and `b`.
pub fn log_mel_distance(a: &[f64], b: &[f64], cfg: &MelConfig) -> Result<f64> {
    if a.len() != b.len() {
        return Err(RvqError::arg(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let fb = mel_filterbank(cfg)?;
    let la = log_mel_from(&fb, &stft_mag(a, cfg)?, cfg.log_floor);
    let lb = log_mel_from(&fb, &stft_mag(b, cfg)?, cfg.log_floor);
    let count = (la.len() * cfg.n_mels) as f64;
    let total = compensated_sum(
        la.iter()
            .zip(&lb)
            .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs())),
    );
    Ok(total / count)
}

/// Mean with a 95% normal-approximation confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiStat {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
}

impl std::fmt::Display for CiStat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let p = f.precision().unwrap_or(3);
        write!(f, "{:.p$} ± {:.p$}", self.mean, self.half_width)
    }
}

/// Sample mean and `1.96 * s / sqrt(n)` (with an `n - 1` variance).
///
/// Values are summed in sorted order, so any permutation of the input gives
/// the same bits.
pub fn mean_ci(values: &[f64]) -> Result<CiStat> {
    if values.is_empty() {
        return Err(RvqError::arg("cannot summarize an empty list"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = compensated_sum(sorted.iter().copied()) / n as f64;
    let half_width = if n < 2 {
        0.0
    } else {
        let var = compensated_sum(sorted.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64;
        Z_95 * var.sqrt() / (n as f64).sqrt()
    };
    Ok(CiStat {
        mean,
        half_width,
        n,
    })
}
