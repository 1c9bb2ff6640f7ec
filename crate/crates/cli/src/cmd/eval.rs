use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use clap::Args;
use rvq_core::metrics::{mean_ci, si_snr};
use rvq_core::pipeline::{
    codec_roundtrip, frame_signal, Codebooks, CodecRun, FrameCode, FrameConfig,
};
use rvq_core::synth::GaussianMixture;
use rvq_core::{CiStat, CodebookSet, Strategy, Window};

use super::codec::encode_vectors;
use super::{load_codebooks, positive, write_json};
use crate::data::{DataSource, Dataset};
use crate::report::{EvalMetadata, EvalReport, EvalRow, SCHEMA_VERSION};
use crate::{CliError, CliResult, GlobalArgs};

#[derive(Debug, Clone, PartialEq)]
pub enum CodebookSource {
    File(PathBuf),
    /// Residual k-means on training data drawn like the dataset.
    Train {
        levels: usize,
        size: usize,
        dim: usize,
        samples: usize,
        iters: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub seed: u64,
    pub source: DataSource,
    pub codebooks: CodebookSource,
    /// Beam sizes; 1 is always added as the greedy baseline.
    pub beams: Vec<usize>,
    /// Level counts; empty means all levels.
    pub n_qs: Vec<usize>,
    /// Fan-out per node; defaults to the beam size.
    pub search_k: Option<usize>,
    /// Hop for audio framing; defaults to half the frame length.
    pub hop: Option<usize>,
    pub stable: bool,
}

impl EvalConfig {
    pub fn synthetic(seed: u64, n: usize, levels: usize, size: usize, dim: usize) -> Self {
        Self {
            seed,
            source: DataSource::Synthetic { n },
            codebooks: CodebookSource::Train {
                levels,
                size,
                dim,
                samples: 4000,
                iters: 25,
            },
            beams: vec![1, 4, 8, 16],
            n_qs: Vec::new(),
            search_k: None,
            hop: None,
            stable: true,
        }
    }
}

fn frame_config(dim: usize, hop: Option<usize>) -> CliResult<FrameConfig> {
    FrameConfig::new(dim, hop.unwrap_or((dim / 2).max(1)), Window::Hann)
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn prepare(cfg: &EvalConfig) -> CliResult<(Dataset, Codebooks, String)> {
    match &cfg.codebooks {
        CodebookSource::File(path) => {
            let cb = load_codebooks(path)?;
            let data = cfg.source.load(cfg.seed, cb.dim())?;
            Ok((data, cb, path.display().to_string()))
        }
        CodebookSource::Train {
            levels,
            size,
            dim,
            samples,
            iters,
        } => {
            let data = cfg.source.load(cfg.seed, *dim)?;
            let train: Vec<Vec<f64>> = match (&cfg.source, &data) {
                (DataSource::Synthetic { .. }, _) => GaussianMixture::standard(cfg.seed, *dim)
                    .sample(*samples, cfg.seed.wrapping_add(2)),
                (_, Dataset::Vectors(rows)) => rows.clone(),
                (_, Dataset::Signals { signals, .. }) => {
                    let frame = frame_config(*dim, cfg.hop)?;
                    let mut frames = Vec::new();
                    for s in signals {
                        frames.extend(frame_signal(s, &frame)?);
                    }
                    frames
                }
            };
            let set = CodebookSet::train_residual_kmeans(&train, *levels, *size, *iters, cfg.seed)
                .context("training codebooks")?;
            let desc = format!("trained on {} vectors, {iters} iterations", train.len());
            Ok((data, Codebooks::Plain(set), desc))
        }
    }
}

fn strategies(cfg: &EvalConfig) -> Vec<(String, usize, usize, Strategy)> {
    let mut beams = cfg.beams.clone();
    beams.push(1);
    beams.sort_unstable();
    beams.dedup();
    beams
        .into_iter()
        .map(|b| {
            if b == 1 {
                ("greedy".to_string(), 1, 1, Strategy::Greedy)
            } else {
                let k = cfg.search_k.unwrap_or(b);
                (
                    "beam".to_string(),
                    b,
                    k,
                    Strategy::Beam {
                        beam_size: b,
                        search_k: k,
                    },
                )
            }
        })
        .collect()
}

fn uniform_size(cb: &Codebooks) -> usize {
    match cb {
        Codebooks::Plain(s) => s.max_size(),
        Codebooks::Grouped(g) => g
            .groups()
            .iter()
            .map(CodebookSet::max_size)
            .max()
            .unwrap_or(0),
    }
}

/// Runs the sweep and returns the report. Timing is left out when `stable`.
pub fn run_eval(cfg: &EvalConfig) -> CliResult<EvalReport> {
    if cfg.beams.contains(&0) || cfg.search_k == Some(0) {
        return Err(CliError::Usage(
            "beam sizes and --search-k must be at least 1".into(),
        ));
    }
    let (data, cb, cb_desc) = prepare(cfg)?;
    let n_qs = if cfg.n_qs.is_empty() {
        vec![cb.levels()]
    } else {
        cfg.n_qs.clone()
    };
    if let Some(&bad) = n_qs.iter().find(|&&q| q == 0 || q > cb.levels()) {
        return Err(CliError::Usage(format!(
            "n_q {bad} is outside [1, {}]",
            cb.levels()
        )));
    }

    let mut rows = Vec::new();
    for &n_q in &n_qs {
        for (name, b, k, strategy) in strategies(cfg) {
            let start = Instant::now();
            let mut row = match &data {
                Dataset::Vectors(xs) => score_vectors(xs, &cb, strategy, n_q)?,
                Dataset::Signals {
                    signals,
                    sample_rate,
                } => score_signals(signals, *sample_rate, &cb, strategy, n_q, cfg.hop)?,
            };
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            row.strategy = name;
            row.beam_size = b;
            row.search_k = k;
            row.runtime_ms_per_sample = (!cfg.stable).then(|| elapsed / row.n as f64);
            rows.push(row);
        }
    }
    Ok(EvalReport {
        schema_version: SCHEMA_VERSION,
        metadata: EvalMetadata {
            seed: cfg.seed,
            codebooks: cb_desc,
            dataset: cfg.source.describe(cfg.seed),
            levels: cb.levels(),
            size: uniform_size(&cb),
            dim: cb.dim(),
            threads: (!cfg.stable).then(rayon::current_num_threads),
        },
        rows,
    })
}

fn base_row(n_q: usize, sq: &[f64]) -> CliResult<EvalRow> {
    let l2: Vec<f64> = sq.iter().map(|v| v.sqrt()).collect();
    Ok(EvalRow {
        strategy: String::new(),
        beam_size: 0,
        search_k: 0,
        n_q,
        n: sq.len(),
        sq_err: mean_ci(sq)?,
        l2_err: mean_ci(&l2)?,
        si_snr: None,
        log_mel_distance: None,
        runtime_ms_per_sample: None,
    })
}

fn collect_ci(values: Option<Vec<f64>>) -> CliResult<Option<CiStat>> {
    match values {
        Some(v) if !v.is_empty() => Ok(Some(mean_ci(&v)?)),
        _ => Ok(None),
    }
}

fn score_vectors(
    xs: &[Vec<f64>],
    cb: &Codebooks,
    strategy: Strategy,
    n_q: usize,
) -> CliResult<EvalRow> {
    let coded = encode_vectors(xs, cb, strategy, n_q)?;
    let sq: Vec<f64> = coded.iter().map(FrameCode::sq_err).collect();
    let mut row = base_row(n_q, &sq)?;
    let si: Option<Vec<f64>> = xs
        .iter()
        .zip(&coded)
        .map(|(x, c)| si_snr(x, &c.quantized()).ok())
        .collect();
    row.si_snr = collect_ci(si)?;
    Ok(row)
}

fn score_signals(
    signals: &[Vec<f64>],
    sample_rate: u32,
    cb: &Codebooks,
    strategy: Strategy,
    n_q: usize,
    hop: Option<usize>,
) -> CliResult<EvalRow> {
    let mut run = CodecRun::new(strategy, n_q, cb.clone(), frame_config(cb.dim(), hop)?)?;
    run.mel.sample_rate = sample_rate;
    run.validate()?;
    let mut sq = Vec::new();
    let mut si = Some(Vec::new());
    let mut mel = Some(Vec::new());
    for (i, s) in signals.iter().enumerate() {
        let out = codec_roundtrip(s, &run).with_context(|| format!("signal {i}"))?;
        sq.extend(out.frames.iter().map(FrameCode::sq_err));
        si = si.zip(out.summary.si_snr).map(|(mut v, x)| {
            v.push(x);
            v
        });
        mel = mel.zip(out.summary.log_mel_distance).map(|(mut v, x)| {
            v.push(x);
            v
        });
    }
    let mut row = base_row(n_q, &sq)?;
    row.si_snr = collect_ci(si)?;
    row.log_mel_distance = collect_ci(mel)?;
    Ok(row)
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Evaluate on this many seeded Gaussian-mixture vectors (the default source).
    #[arg(long, value_parser = positive, conflicts_with_all = ["dataset", "test_signal"])]
    pub synthetic: Option<usize>,
    /// Directory of `.wav` files, or of `.f32`/`.txt` vector files.
    #[arg(long, conflicts_with = "test_signal")]
    pub dataset: Option<PathBuf>,
    /// Run the codec on a seeded test signal of this many seconds.
    #[arg(long, value_name = "SECONDS")]
    pub test_signal: Option<f64>,
    /// Sample rate of the test signal.
    #[arg(long, default_value_t = 24_000)]
    pub sample_rate: u32,
    /// Codebooks to evaluate; trained from the data when absent.
    #[arg(long, conflicts_with_all = ["levels", "size", "dim"])]
    pub codebooks: Option<PathBuf>,
    #[arg(short = 'L', long = "levels", value_parser = positive)]
    pub levels: Option<usize>,
    #[arg(short = 'S', long = "size", value_parser = positive)]
    pub size: Option<usize>,
    #[arg(short = 'D', long = "dim", value_parser = positive)]
    pub dim: Option<usize>,
    /// Training vectors drawn for synthetic data.
    #[arg(long, default_value_t = 4000, value_parser = positive)]
    pub train_samples: usize,
    #[arg(long, default_value_t = 25, value_parser = positive)]
    pub iters: usize,
    /// Beam sizes to compare.
    #[arg(long, value_delimiter = ',', default_value = "1,4,8,16", value_parser = positive)]
    pub beams: Vec<usize>,
    /// Level counts to sweep (default: all levels).
    #[arg(long = "n-q", value_delimiter = ',', value_parser = positive)]
    pub n_q: Vec<usize>,
    #[arg(long, value_parser = positive)]
    pub search_k: Option<usize>,
    #[arg(long, value_parser = positive)]
    pub hop: Option<usize>,
    /// Write the JSON report here.
    #[arg(short = 'o', long = "out")]
    pub out: Option<PathBuf>,
}

pub fn cmd(g: &GlobalArgs, a: EvalArgs) -> CliResult<()> {
    let source = match (&a.dataset, a.test_signal, a.synthetic) {
        (Some(dir), _, _) => DataSource::Dir(dir.clone()),
        (_, Some(seconds), _) => {
            if !(seconds.is_finite() && seconds > 0.0) {
                return Err(CliError::Usage(format!(
                    "--test-signal must be positive, got {seconds}"
                )));
            }
            DataSource::TestSignal {
                seconds,
                sample_rate: a.sample_rate,
            }
        }
        (_, _, n) => DataSource::Synthetic {
            n: n.unwrap_or(1000),
        },
    };
    let codebooks = match &a.codebooks {
        Some(p) => CodebookSource::File(p.clone()),
        None => CodebookSource::Train {
            levels: a.levels.unwrap_or(8),
            size: a.size.unwrap_or(64),
            dim: a.dim.unwrap_or(16),
            samples: a.train_samples,
            iters: a.iters,
        },
    };
    let cfg = EvalConfig {
        seed: g.seed,
        source,
        codebooks,
        beams: a.beams,
        n_qs: a.n_q,
        search_k: a.search_k,
        hop: a.hop,
        stable: g.stable,
    };
    let report = run_eval(&cfg)?;
    print!("{}", report.to_table());
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    Ok(())
}
