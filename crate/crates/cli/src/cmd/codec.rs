use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rvq_core::pipeline::{
    overlap_add, read_audio, write_audio, Audio, Codebooks, CodecRun, FrameCode, FrameConfig,
    SampleFormat,
};
use rvq_core::quantizer::grvq_decode;
use rvq_core::{decode as decode_codes, CodeSequence, Strategy, Window};

use super::{load_codebooks, positive, read_codes, write_codes, write_json, StrategyArgs};
use crate::data::{read_vectors, write_vectors};
use crate::{CliError, CliResult, GlobalArgs};

pub const STREAM_VERSION: u32 = 1;

/// Metadata written next to encoded audio so `decode` can rebuild the signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamInfo {
    pub version: u32,
    pub frame: FrameConfig,
    pub signal_len: usize,
    pub sample_rate: u32,
    pub format: SampleFormat,
    pub n_q: usize,
    pub groups: usize,
    pub strategy: Strategy,
}

/// `<codes>.json`
pub fn sidecar_path(codes: &Path) -> PathBuf {
    let mut s = codes.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Debug, Clone, Args)]
pub struct EncodeArgs {
    /// Audio input (`.wav`, or raw `.f32` with `--sample-rate`).
    #[arg(long, conflicts_with = "vectors", required_unless_present = "vectors")]
    pub input: Option<PathBuf>,
    /// Vector input (`.txt` rows or raw `.f32` of the codebook dimension).
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// `.rvqc` file, or a directory holding a grouped set.
    #[arg(long)]
    pub codebooks: PathBuf,
    #[command(flatten)]
    pub strategy: StrategyArgs,
    /// Candidates expanded per beam node (defaults to the beam size).
    #[arg(long, value_parser = positive)]
    pub search_k: Option<usize>,
    /// Levels to use (defaults to all).
    #[arg(long, value_parser = positive)]
    pub n_q: Option<usize>,
    /// Frame hop for audio (defaults to half the frame length).
    #[arg(long, value_parser = positive)]
    pub hop: Option<usize>,
    #[arg(long, default_value_t = Window::Hann)]
    pub window: Window,
    /// Sample rate of raw `.f32` audio.
    #[arg(long)]
    pub sample_rate: Option<u32>,
    /// Output codes: JSON lines for `.jsonl`, packed binary otherwise.
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
}

fn check_n_q(n_q: Option<usize>, cb: &Codebooks) -> CliResult<usize> {
    let n_q = n_q.unwrap_or(cb.levels());
    if n_q > cb.levels() {
        return Err(CliError::Usage(format!(
            "--n-q {n_q} exceeds the {} levels in the codebooks",
            cb.levels()
        )));
    }
    Ok(n_q)
}

/// Encodes each vector; grouped codebooks give one sequence per group.
pub fn encode_vectors(
    rows: &[Vec<f64>],
    cb: &Codebooks,
    strategy: Strategy,
    n_q: usize,
) -> anyhow::Result<Vec<FrameCode>> {
    let coded: Vec<_> = rows
        .par_iter()
        .map(|x| cb.encode(x, strategy, n_q))
        .collect();
    coded
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.with_context(|| format!("vector {i}")))
        .collect()
}

fn flatten(codes: &[FrameCode]) -> Vec<CodeSequence> {
    codes
        .iter()
        .flat_map(|f| f.groups.iter().map(|g| g.codes.clone()))
        .collect()
}

pub fn encode(_g: &GlobalArgs, a: EncodeArgs) -> CliResult<()> {
    let cb = load_codebooks(&a.codebooks)?;
    let strategy = a.strategy.resolve(a.search_k)?;
    let n_q = check_n_q(a.n_q, &cb)?;

    if let Some(path) = &a.vectors {
        let rows = read_vectors(path, cb.dim())?;
        let coded = encode_vectors(&rows, &cb, strategy, n_q)?;
        write_codes(&a.out, &flatten(&coded))?;
        let mean = coded.iter().map(FrameCode::sq_err).sum::<f64>() / coded.len().max(1) as f64;
        println!("encoded {} vectors, mean sq_err {mean:.6}", coded.len());
        return Ok(());
    }

    let input = a.input.as_ref().expect("clap requires an input");
    let is_wav = input
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    if !is_wav && a.sample_rate.is_none() {
        return Err(CliError::Usage(
            "raw audio input needs --sample-rate".into(),
        ));
    }
    let audio =
        read_audio(input, a.sample_rate).with_context(|| format!("reading {}", input.display()))?;
    let frame_len = cb.dim();
    let hop = a.hop.unwrap_or((frame_len / 2).max(1));
    let frame =
        FrameConfig::new(frame_len, hop, a.window).map_err(|e| CliError::Usage(e.to_string()))?;
    let groups = match &cb {
        Codebooks::Plain(_) => 1,
        Codebooks::Grouped(g) => g.groups().len(),
    };
    let run = CodecRun::new(strategy, n_q, cb, frame.clone())?;
    let coded = run.encode_signal(&audio.samples)?;
    write_codes(&a.out, &flatten(&coded))?;
    let info = StreamInfo {
        version: STREAM_VERSION,
        frame,
        signal_len: audio.samples.len(),
        sample_rate: audio.sample_rate,
        format: audio.format,
        n_q,
        groups,
        strategy,
    };
    write_json(&sidecar_path(&a.out), &info)?;
    println!("encoded {} frames of {} samples", coded.len(), frame_len);
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct DecodeArgs {
    /// Codes written by `encode`.
    #[arg(long)]
    pub codes: PathBuf,
    #[arg(long)]
    pub codebooks: PathBuf,
    /// Decode to vectors (`.txt` or raw `.f32`) instead of audio.
    #[arg(long)]
    pub vectors: bool,
    /// Output audio (`.wav` or raw `.f32`) or vector file.
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
}

/// Decodes sequences, taking `groups` consecutive sequences per vector.
pub fn decode_rows(codes: &[CodeSequence], cb: &Codebooks) -> anyhow::Result<Vec<Vec<f64>>> {
    match cb {
        Codebooks::Plain(set) => codes
            .iter()
            .enumerate()
            .map(|(i, c)| decode_codes(c, set).with_context(|| format!("sequence {i}")))
            .collect(),
        Codebooks::Grouped(g) => {
            let n = g.groups().len();
            if !codes.len().is_multiple_of(n) {
                bail!("{} sequences do not split into {n} groups", codes.len());
            }
            codes
                .chunks(n)
                .enumerate()
                .map(|(i, c)| grvq_decode(c, g).with_context(|| format!("vector {i}")))
                .collect()
        }
    }
}

pub fn decode(_g: &GlobalArgs, a: DecodeArgs) -> CliResult<()> {
    let cb = load_codebooks(&a.codebooks)?;
    let codes = read_codes(&a.codes)?;
    let rows = decode_rows(&codes, &cb)?;
    if a.vectors {
        write_vectors(&a.out, &rows)?;
        println!("decoded {} vectors", rows.len());
        return Ok(());
    }

    let side = sidecar_path(&a.codes);
    let text =
        std::fs::read_to_string(&side).with_context(|| format!("reading {}", side.display()))?;
    let info: StreamInfo =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", side.display()))?;
    if info.version != STREAM_VERSION {
        return Err(
            anyhow::anyhow!("{}: unsupported version {}", side.display(), info.version).into(),
        );
    }
    if info.frame.frame_len() != cb.dim() {
        return Err(anyhow::anyhow!(
            "stream frame length {} does not match codebook dim {}",
            info.frame.frame_len(),
            cb.dim()
        )
        .into());
    }
    let expected = info.frame.n_frames(info.signal_len);
    if rows.len() != expected {
        return Err(
            anyhow::anyhow!("{} frames decoded, stream needs {expected}", rows.len()).into(),
        );
    }
    let samples = overlap_add(&rows, &info.frame, info.signal_len)?;
    let audio = Audio {
        samples,
        sample_rate: info.sample_rate,
        format: info.format,
    };
    write_audio(&a.out, &audio).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "decoded {} frames to {} samples",
        rows.len(),
        info.signal_len
    );
    Ok(())
}
