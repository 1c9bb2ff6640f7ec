pub mod bench;
pub mod codebooks;
pub mod codec;
pub mod eval;
pub mod oracle;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use anyhow::Context;
use clap::Args;
use rvq_core::pipeline::Codebooks;
use rvq_core::quantizer::{read_jsonl, read_packed, write_jsonl, write_packed};
use rvq_core::{CodeSequence, CodebookSet, GroupedCodebookSet, Strategy};

use crate::{CliError, CliResult};

/// Parses an integer that must be at least 1.
pub(crate) fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

/// Encoder selection shared by `encode`.
#[derive(Debug, Clone, Args)]
#[group(multiple = false)]
pub struct StrategyArgs {
    /// Nearest-code search at every level.
    #[arg(long)]
    pub greedy: bool,
    /// Beam search keeping this many candidates.
    #[arg(long, value_name = "B", value_parser = positive)]
    pub beam: Option<usize>,
    /// Brute-force search over every code sequence (small sets only).
    #[arg(long)]
    pub exhaustive: bool,
}

impl StrategyArgs {
    pub fn resolve(&self, search_k: Option<usize>) -> CliResult<Strategy> {
        if search_k.is_some() && self.beam.is_none() {
            return Err(CliError::Usage("--search-k requires --beam".into()));
        }
        Ok(match (self.greedy, self.beam, self.exhaustive) {
            (_, Some(b), _) => Strategy::Beam {
                beam_size: b,
                search_k: search_k.unwrap_or(b),
            },
            (_, _, true) => Strategy::Exhaustive,
            _ => Strategy::Greedy,
        })
    }
}

/// Loads a `.rvqc` file, or a grouped set from a directory with a manifest.
pub fn load_codebooks(path: &Path) -> anyhow::Result<Codebooks> {
    let cb = if path.is_dir() {
        Codebooks::Grouped(
            GroupedCodebookSet::load_dir(path)
                .with_context(|| format!("loading {}", path.display()))?,
        )
    } else {
        Codebooks::Plain(
            CodebookSet::load(path).with_context(|| format!("loading {}", path.display()))?,
        )
    };
    Ok(cb)
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

/// Writes codes as JSON lines for `.jsonl` paths, packed binary otherwise.
pub fn write_codes(path: &Path, codes: &[CodeSequence]) -> anyhow::Result<()> {
    let w =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    if is_jsonl(path) {
        write_jsonl(codes, w)?;
    } else {
        write_packed(codes, w)?;
    }
    Ok(())
}

pub fn read_codes(path: &Path) -> anyhow::Result<Vec<CodeSequence>> {
    let r =
        BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let codes = if is_jsonl(path) {
        read_jsonl(r)?
    } else {
        read_packed(r)?
    };
    Ok(codes)
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
