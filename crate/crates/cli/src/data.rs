//! Vector files, datasets and seeded random instances.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rvq_core::pipeline::{read_audio, read_raw_f32, write_raw_f32};
use rvq_core::synth::{test_signal, GaussianMixture};
use rvq_core::CodebookSet;

fn has_ext(path: &Path, exts: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

fn is_text(path: &Path) -> bool {
    has_ext(path, &["txt", "csv"])
}

/// Reads row vectors from a `.txt`/`.csv` file (one vector per line, blank
/// and `#` lines skipped) or from raw little-endian `f32` split into rows of
/// `dim` values.
pub fn read_vectors(path: &Path, dim: usize) -> anyhow::Result<Vec<Vec<f64>>> {
    let rows = if is_text(path) {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .with_context(|| format!("{}:{}: bad number", path.display(), n + 1))?;
            rows.push(row);
        }
        rows
    } else {
        let flat = read_raw_f32(path).with_context(|| format!("reading {}", path.display()))?;
        if flat.len() % dim != 0 {
            bail!(
                "{}: {} values do not split into rows of dim {dim}",
                path.display(),
                flat.len()
            );
        }
        flat.chunks(dim).map(<[f64]>::to_vec).collect()
    };
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
        bail!(
            "{}: row {i} has dim {}, codebooks have dim {dim}",
            path.display(),
            r.len()
        );
    }
    Ok(rows)
}

/// Writes rows as text (shortest round-trip decimal) or raw `f32`.
pub fn write_vectors(path: &Path, rows: &[Vec<f64>]) -> anyhow::Result<()> {
    if is_text(path) {
        let mut out = Vec::new();
        for r in rows {
            let line: Vec<String> = r.iter().map(f64::to_string).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    } else {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        write_raw_f32(path, &flat).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Input for `eval`: plain vectors or whole signals run through the codec.
#[derive(Debug, Clone)]
pub enum Dataset {
    Vectors(Vec<Vec<f64>>),
    Signals {
        signals: Vec<Vec<f64>>,
        sample_rate: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// `n` Gaussian-mixture vectors of the codebook dimension.
    Synthetic { n: usize },
    /// A seeded tone-plus-noise signal of the given length.
    TestSignal { seconds: f64, sample_rate: u32 },
    /// Every `.wav` file, or every `.f32`/`.txt` vector file, in a directory.
    Dir(PathBuf),
}

impl DataSource {
    pub fn describe(&self, seed: u64) -> String {
        match self {
            DataSource::Synthetic { n } => format!("synthetic gaussian mixture n={n} seed={seed}"),
            DataSource::TestSignal {
                seconds,
                sample_rate,
            } => {
                format!("test signal {seconds} s at {sample_rate} Hz seed={seed}")
            }
            DataSource::Dir(p) => format!("directory {}", p.display()),
        }
    }

    /// Loads the data. `dim` is the vector dimension for vector sources.
    pub fn load(&self, seed: u64, dim: usize) -> anyhow::Result<Dataset> {
        let data = match self {
            DataSource::Synthetic { n } => Dataset::Vectors(
                GaussianMixture::standard(seed, dim).sample(*n, seed.wrapping_add(1)),
            ),
            DataSource::TestSignal {
                seconds,
                sample_rate,
            } => Dataset::Signals {
                signals: vec![test_signal(seed, *seconds, *sample_rate)],
                sample_rate: *sample_rate,
            },
            DataSource::Dir(dir) => load_dir(dir, dim)?,
        };
        let empty = match &data {
            Dataset::Vectors(v) => v.is_empty(),
            Dataset::Signals { signals, .. } => signals.iter().all(Vec::is_empty),
        };
        if empty {
            bail!("dataset is empty");
        }
        Ok(data)
    }
}

fn load_dir(dir: &Path, dim: usize) -> anyhow::Result<Dataset> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.is_file() && has_ext(p, &["wav", "f32", "txt", "csv"]));
    files.sort();
    let wavs = files.iter().filter(|p| has_ext(p, &["wav"])).count();
    if wavs > 0 && wavs != files.len() {
        bail!("{} mixes .wav files with vector files", dir.display());
    }
    if wavs == 0 {
        let mut rows = Vec::new();
        for f in &files {
            rows.extend(read_vectors(f, dim)?);
        }
        return Ok(Dataset::Vectors(rows));
    }
    let mut signals = Vec::new();
    let mut rate = None;
    for f in &files {
        let audio = read_audio(f, None).with_context(|| format!("reading {}", f.display()))?;
        if *rate.get_or_insert(audio.sample_rate) != audio.sample_rate {
            bail!(
                "{}: sample rate {} differs from the rest of the dataset",
                f.display(),
                audio.sample_rate
            );
        }
        signals.push(audio.samples);
    }
    Ok(Dataset::Signals {
        signals,
        sample_rate: rate.unwrap_or(0),
    })
}

/// A random codebook set and input vector for oracle comparisons.
#[derive(Debug, Clone)]
pub struct Instance {
    pub set: CodebookSet,
    pub x: Vec<f64>,
}

/// Seeded instance with Gaussian codebooks. With `tied`, codes and input lie
/// on a coarse half-integer grid so equal distances are common.
pub fn random_instance(seed: u64, levels: usize, size: usize, dim: usize, tied: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> f64 {
        if tied {
            rng.random_range(-4i32..=4) as f64 * 0.5
        } else {
            StandardNormal.sample(rng)
        }
    };
    let tables: Vec<Vec<f64>> = (0..levels)
        .map(|l| {
            let shrink = if tied { 1.0 } else { 0.6f64.powi(l as i32) };
            (0..size * dim).map(|_| draw(&mut rng) * shrink).collect()
        })
        .collect();
    let x = (0..dim).map(|_| draw(&mut rng)).collect();
    Instance {
        set: CodebookSet::from_tables(dim, tables).expect("finite tables"),
        x,
    }
}

/// Codebooks of the scalar example where greedy search is suboptimal:
/// levels {1, 3}, {0, 1}, {0, 0.1} and input 2.13.
pub fn scalar_example() -> Instance {
    Instance {
        set: CodebookSet::from_tables(1, vec![vec![1.0, 3.0], vec![0.0, 1.0], vec![0.0, 0.1]])
            .expect("finite tables"),
        x: vec![2.13],
    }
}
