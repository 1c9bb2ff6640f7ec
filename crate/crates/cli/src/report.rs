//! JSON report schemas and their text tables.

use std::fmt::Write as _;

use rvq_core::{CiStat, ExecMode};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetadata {
    pub seed: u64,
    pub codebooks: String,
    pub dataset: String,
    pub levels: usize,
    pub size: usize,
    pub dim: usize,
    /// Worker threads; omitted from stable reports.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub strategy: String,
    pub beam_size: usize,
    pub search_k: usize,
    pub n_q: usize,
    /// Vectors (or frames) scored.
    pub n: usize,
    pub sq_err: CiStat,
    pub l2_err: CiStat,
    /// Per-vector SI-SNR for vector data, per-signal for audio.
    pub si_snr: Option<CiStat>,
    /// Per-signal log-mel distance; audio data only.
    pub log_mel_distance: Option<CiStat>,
    pub runtime_ms_per_sample: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub metadata: EvalMetadata,
    pub rows: Vec<EvalRow>,
}

fn opt(v: Option<CiStat>) -> String {
    v.map_or_else(|| "n/a".into(), |c| c.to_string())
}

/// Aligned text table, one line per row.
pub fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}", w = *w))
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &mut headers.iter().copied());
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "{}", rule.join("  "));
    for r in rows {
        line(&mut out, &mut r.iter().map(String::as_str));
    }
    out
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let headers = [
            "strategy",
            "B",
            "k",
            "n_q",
            "n",
            "sq_err",
            "l2_err",
            "si_snr",
            "log_mel",
            "PESQ",
            "STOI",
            "NISQA",
            "ms/sample",
        ];
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.strategy.clone(),
                    r.beam_size.to_string(),
                    r.search_k.to_string(),
                    r.n_q.to_string(),
                    r.n.to_string(),
                    format!("{:.4}", r.sq_err),
                    format!("{:.4}", r.l2_err),
                    opt(r.si_snr),
                    opt(r.log_mel_distance),
                    "n/a".into(),
                    "n/a".into(),
                    "n/a".into(),
                    r.runtime_ms_per_sample
                        .map_or_else(|| "-".into(), |v| format!("{v:.4}")),
                ]
            })
            .collect();
        let m = &self.metadata;
        format!(
            "dataset: {}\ncodebooks: {} (L={} S={} D={})\n{}",
            m.dataset,
            m.codebooks,
            m.levels,
            m.size,
            m.dim,
            render_table(&headers, &rows)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub beam_size: usize,
    pub mode: ExecMode,
    pub reps: usize,
    /// Wall time per batch in milliseconds.
    pub ms: CiStat,
    pub ms_per_sample: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub seed: u64,
    pub samples: usize,
    pub levels: usize,
    pub size: usize,
    pub dim: usize,
    pub threads: usize,
    /// Parallel and sequential outputs compared bit for bit before timing.
    pub verified: bool,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_table(&self) -> String {
        let headers = ["B", "mode", "reps", "ms/batch", "ms/sample"];
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.beam_size.to_string(),
                    match r.mode {
                        ExecMode::Sequential => "sequential".into(),
                        ExecMode::Parallel => "parallel".into(),
                    },
                    r.reps.to_string(),
                    format!("{:.3}", r.ms),
                    format!("{:.5}", r.ms_per_sample),
                ]
            })
            .collect();
        format!(
            "{} vectors, L={} S={} D={}, {} threads, outputs verified bit-equal\n{}",
            self.samples,
            self.levels,
            self.size,
            self.dim,
            self.threads,
            render_table(&headers, &rows)
        )
    }
}
