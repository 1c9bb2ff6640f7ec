use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use clap::Args;
use rvq_core::metrics::mean_ci;
use rvq_core::quantizer::encode_batch;
use rvq_core::synth::GaussianMixture;
use rvq_core::{BeamParams, CodebookSet, ExecMode, QuantResult};

use super::{positive, write_json};
use crate::report::{BenchReport, BenchRow, SCHEMA_VERSION};
use crate::{CliError, CliResult, GlobalArgs};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub seed: u64,
    pub samples: usize,
    pub levels: usize,
    pub size: usize,
    pub dim: usize,
    pub beams: Vec<usize>,
    pub reps: usize,
    pub codebooks: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 1000,
            levels: 8,
            size: 64,
            dim: 16,
            beams: vec![1, 4, 16],
            reps: 100,
            codebooks: None,
        }
    }
}

fn bit_equal(a: &[QuantResult], b: &[QuantResult]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.codes == y.codes
                && x.sq_err.to_bits() == y.sq_err.to_bits()
                && x.quantized
                    .iter()
                    .zip(&y.quantized)
                    .all(|(p, q)| p.to_bits() == q.to_bits())
        })
}

/// Verifies that both execution modes agree for every beam size, then times them.
pub fn run_bench(cfg: &BenchConfig) -> CliResult<BenchReport> {
    if cfg.beams.is_empty() || cfg.beams.contains(&0) || cfg.reps == 0 || cfg.samples == 0 {
        return Err(CliError::Usage(
            "beam sizes, repetitions and samples must be at least 1".into(),
        ));
    }
    let set = match &cfg.codebooks {
        Some(p) => CodebookSet::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => CodebookSet::generate_random(cfg.seed, cfg.levels, cfg.size, cfg.dim, 0.5)?,
    };
    let xs = GaussianMixture::standard(cfg.seed, set.dim())
        .sample(cfg.samples, cfg.seed.wrapping_add(1));
    let modes = [ExecMode::Sequential, ExecMode::Parallel];

    for &b in &cfg.beams {
        let params = BeamParams::new(b, set.levels());
        let seq = encode_batch(&xs, &set, &params, ExecMode::Sequential)?;
        let par = encode_batch(&xs, &set, &params, ExecMode::Parallel)?;
        if !bit_equal(&seq, &par) {
            return Err(
                anyhow::anyhow!("B={b}: parallel output differs from sequential output").into(),
            );
        }
    }

    let mut rows = Vec::new();
    for &b in &cfg.beams {
        let params = BeamParams::new(b, set.levels());
        for mode in modes {
            let mut ms = Vec::with_capacity(cfg.reps);
            for _ in 0..cfg.reps {
                let start = Instant::now();
                std::hint::black_box(encode_batch(&xs, &set, &params, mode)?);
                ms.push(start.elapsed().as_secs_f64() * 1e3);
            }
            let stat = mean_ci(&ms)?;
            rows.push(BenchRow {
                beam_size: b,
                mode,
                reps: cfg.reps,
                ms_per_sample: stat.mean / cfg.samples as f64,
                ms: stat,
            });
        }
    }
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        samples: cfg.samples,
        levels: set.levels(),
        size: set.max_size(),
        dim: set.dim(),
        threads: rayon::current_num_threads(),
        verified: true,
        rows,
    })
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Codebooks to use; seeded random ones otherwise.
    #[arg(long, conflicts_with_all = ["levels", "size", "dim"])]
    pub codebooks: Option<PathBuf>,
    #[arg(long, default_value_t = 1000, value_parser = positive)]
    pub samples: usize,
    #[arg(short = 'L', long = "levels", value_parser = positive)]
    pub levels: Option<usize>,
    #[arg(short = 'S', long = "size", value_parser = positive)]
    pub size: Option<usize>,
    #[arg(short = 'D', long = "dim", value_parser = positive)]
    pub dim: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,4,16", value_parser = positive)]
    pub beams: Vec<usize>,
    #[arg(long, default_value_t = 100, value_parser = positive)]
    pub reps: usize,
    /// Write the JSON report here.
    #[arg(short = 'o', long = "out")]
    pub out: Option<PathBuf>,
}

pub fn cmd(g: &GlobalArgs, a: BenchArgs) -> CliResult<()> {
    let d = BenchConfig::default();
    let cfg = BenchConfig {
        seed: g.seed,
        samples: a.samples,
        levels: a.levels.unwrap_or(d.levels),
        size: a.size.unwrap_or(d.size),
        dim: a.dim.unwrap_or(d.dim),
        beams: a.beams,
        reps: a.reps,
        codebooks: a.codebooks,
    };
    let report = run_bench(&cfg)?;
    print!("{}", report.to_table());
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    Ok(())
}
