use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frame::{frame_signal, overlap_add, FrameConfig};
use crate::codebooks::{CodebookSet, GroupedCodebookSet};
use crate::error::{Result, RvqError};
use crate::metrics::{log_mel_distance, mean_ci, si_snr, CiStat, MelConfig};
use crate::quantizer::{ExecMode, QuantResult, Strategy};

/// Plain or grouped codebooks driving a codec run.
#[derive(Debug, Clone, PartialEq)]
pub enum Codebooks {
    Plain(CodebookSet),
    Grouped(GroupedCodebookSet),
}

impl Codebooks {
    pub fn dim(&self) -> usize {
        match self {
            Codebooks::Plain(s) => s.dim(),
            Codebooks::Grouped(g) => g.total_dim(),
        }
    }

    pub fn levels(&self) -> usize {
        match self {
            Codebooks::Plain(s) => s.levels(),
            Codebooks::Grouped(g) => g.levels(),
        }
    }

    fn sets(&self) -> Vec<&CodebookSet> {
        match self {
            Codebooks::Plain(s) => vec![s],
            Codebooks::Grouped(g) => g.groups().iter().collect(),
        }
    }

    /// Index bits per frame at `n_q` levels: `Σ_groups Σ_levels log2(S)`.
    pub fn bits_per_frame(&self, n_q: usize) -> f64 {
        self.sets()
            .iter()
            .flat_map(|s| s.codebooks()[..n_q].iter())
            .map(|cb| (cb.size() as f64).log2())
            .sum()
    }

    /// Encodes one frame; grouped sets return one result per group.
    pub fn encode(&self, x: &[f64], strategy: Strategy, n_q: usize) -> Result<FrameCode> {
        let mut offset = 0;
        let groups = self
            .sets()
            .into_iter()
            .map(|set| {
                let part = &x[offset..offset + set.dim()];
                offset += set.dim();
                strategy.encode(part, set, n_q)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FrameCode { groups })
    }
}

/// Encoder output for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCode {
    pub groups: Vec<QuantResult>,
}

impl FrameCode {
    pub fn sq_err(&self) -> f64 {
        self.groups.iter().map(|g| g.sq_err).sum()
    }

    pub fn quantized(&self) -> Vec<f64> {
        self.groups
            .iter()
            .flat_map(|g| g.quantized.iter().copied())
            .collect()
    }
}

/// One configuration of the waveform codec.
#[derive(Debug, Clone)]
pub struct CodecRun {
    pub strategy: Strategy,
    pub n_q: usize,
    pub codebooks: Codebooks,
    pub frame: FrameConfig,
    pub mel: MelConfig,
    pub mode: ExecMode,
}

impl CodecRun {
    pub fn new(
        strategy: Strategy,
        n_q: usize,
        codebooks: Codebooks,
        frame: FrameConfig,
    ) -> Result<Self> {
        let run = Self {
            strategy,
            n_q,
            codebooks,
            frame,
            mel: MelConfig::default(),
            mode: ExecMode::Parallel,
        };
        run.validate()?;
        Ok(run)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame.frame_len() != self.codebooks.dim() {
            return Err(RvqError::arg(format!(
                "frame length {} does not match codebook dim {}",
                self.frame.frame_len(),
                self.codebooks.dim()
            )));
        }
        if self.n_q == 0 || self.n_q > self.codebooks.levels() {
            return Err(RvqError::arg(format!(
                "n_q = {} is outside [1, {}]",
                self.n_q,
                self.codebooks.levels()
            )));
        }
        self.mel.validate()
    }

    /// Encodes every frame of `signal`, in frame order.
    pub fn encode_signal(&self, signal: &[f64]) -> Result<Vec<FrameCode>> {
        self.validate()?;
        let frames = frame_signal(signal, &self.frame)?;
        let encode = |(t, f): (usize, &Vec<f64>)| {
            self.codebooks
                .encode(f, self.strategy, self.n_q)
                .map_err(|e| RvqError::at(t, e))
        };
        let coded: Vec<Result<FrameCode>> = match self.mode {
            ExecMode::Sequential => frames.iter().enumerate().map(encode).collect(),
            ExecMode::Parallel => frames.par_iter().enumerate().map(encode).collect(),
        };
        coded.into_iter().collect()
    }

    /// Overlap-adds decoded frames back to `out_len` samples.
    pub fn reconstruct(&self, codes: &[FrameCode], out_len: usize) -> Result<Vec<f64>> {
        let frames: Vec<Vec<f64>> = codes.iter().map(FrameCode::quantized).collect();
        overlap_add(&frames, &self.frame, out_len)
    }
}

/// Aggregates for one codec round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecSummary {
    pub frames: usize,
    pub sq_err: CiStat,
    pub l2_err: CiStat,
    /// SI-SNR on the interior, `None` when it is silent or empty.
    pub si_snr: Option<f64>,
    /// Log-mel distance on the interior, `None` when shorter than one FFT.
    pub log_mel_distance: Option<f64>,
    /// Raw index bit-rate in bits per second.
    pub index_bitrate: f64,
}

#[derive(Debug, Clone)]
pub struct CodecOutput {
    pub reconstructed: Vec<f64>,
    pub frames: Vec<FrameCode>,
    pub summary: CodecSummary,
}

/// Samples `[frame_len, len - frame_len)`, excluded from edge effects.
pub fn interior(len: usize, frame_len: usize) -> std::ops::Range<usize> {
    let start = frame_len.min(len);
    let end = len.saturating_sub(frame_len).max(start);
    start..end
}

/// Frames, encodes, decodes and overlap-adds `signal`, then scores the result.
pub fn codec_roundtrip(signal: &[f64], run: &CodecRun) -> Result<CodecOutput> {
    let frames = run.encode_signal(signal)?;
    let reconstructed = run.reconstruct(&frames, signal.len())?;

    let sq: Vec<f64> = frames.iter().map(FrameCode::sq_err).collect();
    let l2: Vec<f64> = sq.iter().map(|v| v.sqrt()).collect();
    let inner = interior(signal.len(), run.frame.frame_len());
    let (a, b) = (&signal[inner.clone()], &reconstructed[inner]);
    let si = if a.is_empty() {
        None
    } else {
        si_snr(a, b).ok()
    };
    let mel = if a.len() >= run.mel.fft_size {
        Some(log_mel_distance(a, b, &run.mel)?)
    } else {
        None
    };
    let frame_rate = run.mel.sample_rate as f64 / run.frame.hop() as f64;
    let summary = CodecSummary {
        frames: frames.len(),
        sq_err: mean_ci(&sq)?,
        l2_err: mean_ci(&l2)?,
        si_snr: si,
        log_mel_distance: mel,
        index_bitrate: run.codebooks.bits_per_frame(run.n_q) * frame_rate,
    };
    Ok(CodecOutput {
        reconstructed,
        frames,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::window::Window;

    fn run(strategy: Strategy) -> CodecRun {
        let set = CodebookSet::generate_random(3, 4, 16, 8, 0.3).unwrap();
        CodecRun::new(
            strategy,
            4,
            Codebooks::Plain(set),
            FrameConfig::new(8, 4, Window::Hann).unwrap(),
        )
        .unwrap()
    }

    fn signal() -> Vec<f64> {
        (0..2000).map(|i| (i as f64 * 0.05).sin() * 0.8).collect()
    }

    #[test]
    fn validation() {
        let set = CodebookSet::generate_random(3, 2, 4, 8, 1.0).unwrap();
        let fc = FrameConfig::new(16, 8, Window::Hann).unwrap();
        assert!(CodecRun::new(Strategy::Greedy, 2, Codebooks::Plain(set.clone()), fc).is_err());
        let fc = FrameConfig::new(8, 4, Window::Hann).unwrap();
        assert!(CodecRun::new(Strategy::Greedy, 3, Codebooks::Plain(set), fc).is_err());
    }

    #[test]
    fn beam_one_matches_greedy() {
        let x = signal();
        let g = codec_roundtrip(&x, &run(Strategy::Greedy)).unwrap();
        let b = codec_roundtrip(&x, &run(Strategy::beam(1))).unwrap();
        assert_eq!(g.reconstructed, b.reconstructed);
        assert_eq!(g.frames, b.frames);
    }

    #[test]
    fn summary_mean_is_frame_mean() {
        let out = codec_roundtrip(&signal(), &run(Strategy::beam(4))).unwrap();
        let sq: Vec<f64> = out.frames.iter().map(FrameCode::sq_err).collect();
        assert_eq!(out.summary.sq_err, mean_ci(&sq).unwrap());
        assert_eq!(out.summary.frames, 1 + (2000 - 8) / 4);
        assert!(out.summary.si_snr.is_some());
        assert!(out.summary.log_mel_distance.is_some());
        // 4 levels * 4 bits at 24000 / 4 frames per second
        assert_eq!(out.summary.index_bitrate, 16.0 * 6000.0);
    }

    #[test]
    fn modes_agree() {
        let mut r = run(Strategy::beam(3));
        let x = signal();
        let p = codec_roundtrip(&x, &r).unwrap();
        r.mode = ExecMode::Sequential;
        let s = codec_roundtrip(&x, &r).unwrap();
        assert_eq!(p.reconstructed, s.reconstructed);
    }

    #[test]
    fn grouped_frames() {
        let g = GroupedCodebookSet::new(vec![
            CodebookSet::generate_random(1, 2, 8, 4, 0.3).unwrap(),
            CodebookSet::generate_random(2, 2, 8, 4, 0.3).unwrap(),
        ])
        .unwrap();
        let r = CodecRun::new(
            Strategy::beam(2),
            2,
            Codebooks::Grouped(g),
            FrameConfig::new(8, 4, Window::Hann).unwrap(),
        )
        .unwrap();
        let out = codec_roundtrip(&signal(), &r).unwrap();
        assert!(out.frames.iter().all(|f| f.groups.len() == 2));
        assert_eq!(out.summary.index_bitrate, 12.0 * 6000.0);
    }

    #[test]
    fn interior_bounds() {
        assert_eq!(interior(100, 10), 10..90);
        assert_eq!(interior(15, 10), 10..10);
        assert_eq!(interior(5, 10), 5..5);
    }
}
