use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use rvq_core::quantizer::{encode_batch, ExecMode};
use rvq_core::synth::GaussianMixture;
use rvq_core::{BeamParams, CodebookSet};

use super::positive;
use crate::data::read_vectors;
use crate::{CliError, CliResult, GlobalArgs};

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Number of levels.
    #[arg(short = 'L', long = "levels", value_parser = positive)]
    pub levels: usize,
    /// Entries per codebook.
    #[arg(short = 'S', long = "size", value_parser = positive)]
    pub size: usize,
    /// Vector dimension.
    #[arg(short = 'D', long = "dim", value_parser = positive)]
    pub dim: usize,
    /// Standard deviation of the entries.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
}

pub fn gen(g: &GlobalArgs, a: GenArgs) -> CliResult<()> {
    if !(a.scale.is_finite() && a.scale > 0.0) {
        return Err(CliError::Usage(format!(
            "--scale must be positive, got {}",
            a.scale
        )));
    }
    let set = CodebookSet::generate_random(g.seed, a.levels, a.size, a.dim, a.scale)?;
    set.save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "wrote {} (L={} S={} D={})",
        a.out.display(),
        a.levels,
        a.size,
        a.dim
    );
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Training vectors (`.f32` rows of `--dim` values, or `.txt`).
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    pub input: Option<PathBuf>,
    /// Train on this many seeded Gaussian-mixture vectors instead.
    #[arg(long, value_parser = positive)]
    pub synthetic: Option<usize>,
    #[arg(short = 'D', long = "dim", value_parser = positive)]
    pub dim: usize,
    #[arg(short = 'L', long = "levels", value_parser = positive)]
    pub levels: usize,
    #[arg(short = 'S', long = "size", value_parser = positive)]
    pub size: usize,
    /// Lloyd iterations per level.
    #[arg(long, default_value_t = 25, value_parser = positive)]
    pub iters: usize,
    /// Fraction of the vectors held out for the comparison printout.
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
}

pub fn train(g: &GlobalArgs, a: TrainArgs) -> CliResult<()> {
    if !(0.0..1.0).contains(&a.holdout) {
        return Err(CliError::Usage(format!(
            "--holdout must be in [0, 1), got {}",
            a.holdout
        )));
    }
    let vectors = match (&a.input, a.synthetic) {
        (Some(path), _) => read_vectors(path, a.dim)?,
        (None, Some(n)) => {
            GaussianMixture::standard(g.seed, a.dim).sample(n, g.seed.wrapping_add(1))
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let held = ((vectors.len() as f64) * a.holdout).floor() as usize;
    let (fit, check) = vectors.split_at(vectors.len() - held);
    let set = CodebookSet::train_residual_kmeans(fit, a.levels, a.size, a.iters, g.seed)?;
    set.save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "trained L={} S={} D={} on {} vectors -> {}",
        a.levels,
        a.size,
        a.dim,
        fit.len(),
        a.out.display()
    );

    if !check.is_empty() {
        let spread = rms(fit);
        let random =
            CodebookSet::generate_random(g.seed, a.levels, a.size, a.dim, spread.max(1e-6))?;
        let params = BeamParams::greedy(a.levels);
        let mean = |s: &CodebookSet| -> CliResult<f64> {
            let r = encode_batch(check, s, &params, ExecMode::Parallel)?;
            Ok(r.iter().map(|q| q.sq_err).sum::<f64>() / r.len() as f64)
        };
        println!("held-out greedy sq_err ({} vectors):", check.len());
        println!("  trained {:.6}", mean(&set)?);
        println!("  random  {:.6}", mean(&random)?);
    }
    Ok(())
}

fn rms(rows: &[Vec<f64>]) -> f64 {
    let n: usize = rows.iter().map(Vec::len).sum();
    (rows.iter().flatten().map(|v| v * v).sum::<f64>() / n.max(1) as f64).sqrt()
}
