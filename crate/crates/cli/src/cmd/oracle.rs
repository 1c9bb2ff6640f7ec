use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rvq_core::metrics::sq_l2;
use rvq_core::quantizer::{encode_exhaustive_with_guard, DEFAULT_EXHAUSTIVE_GUARD};
use rvq_core::{
    decode, encode_beam, encode_greedy, BeamParams, CodebookSet, QuantResult, RvqError,
};

use super::{positive, write_json};
use crate::data::{random_instance, scalar_example, Instance};
use crate::{CliError, CliResult, GlobalArgs};

/// `(B, k)` pairs checked against the exhaustive bound.
pub const GRID_BEAMS: [usize; 4] = [1, 2, 4, 8];
pub const GRID_SEARCH_K: [usize; 3] = [1, 2, 5];

/// Signature of the beam encoder under test.
pub type BeamFn = dyn Fn(&[f64], &CodebookSet, &BeamParams) -> rvq_core::Result<QuantResult> + Sync;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub seed: u64,
    pub instances: usize,
    pub levels: usize,
    pub size: usize,
    pub dim: usize,
    pub guard: u128,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 500,
            levels: 3,
            size: 5,
            dim: 2,
            guard: DEFAULT_EXHAUSTIVE_GUARD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub instance: usize,
    pub seed: u64,
    pub check: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub instances: usize,
    pub checks: usize,
    /// L2 error of the exhaustive search on the scalar example (instance 0).
    pub scalar_example_error: f64,
    pub failures: Vec<Counterexample>,
}

impl OracleSummary {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn run_oracle_check(cfg: &OracleConfig) -> CliResult<OracleSummary> {
    run_oracle_check_with(cfg, &encode_beam)
}

fn same_bits(a: &QuantResult, b: &QuantResult) -> bool {
    a.codes == b.codes
        && a.sq_err.to_bits() == b.sq_err.to_bits()
        && a.l2_err.to_bits() == b.l2_err.to_bits()
        && a.quantized.len() == b.quantized.len()
        && a.quantized
            .iter()
            .zip(&b.quantized)
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Problems with a result that should hold for any encoder output.
pub fn self_consistency(
    x: &[f64],
    set: &CodebookSet,
    r: &QuantResult,
    n_q: usize,
) -> Option<String> {
    if r.codes.n_q() != n_q {
        return Some(format!("{} indices for {n_q} levels", r.codes.n_q()));
    }
    let decoded = match decode(&r.codes, set) {
        Ok(d) => d,
        Err(e) => return Some(format!("codes do not decode: {e}")),
    };
    if decoded
        .iter()
        .zip(&r.quantized)
        .any(|(a, b)| a.to_bits() != b.to_bits())
    {
        return Some(format!(
            "decode {decoded:?} differs from quantized {:?}",
            r.quantized
        ));
    }
    let err = sq_l2(x, &r.quantized).unwrap_or(f64::NAN);
    if err.to_bits() != r.sq_err.to_bits() || r.l2_err.to_bits() != r.sq_err.sqrt().to_bits() {
        return Some(format!(
            "reported error {} / {}, recomputed {err}",
            r.sq_err, r.l2_err
        ));
    }
    None
}

struct Checker<'a> {
    instance: usize,
    seed: u64,
    checks: usize,
    failures: Vec<Counterexample>,
    beam: &'a BeamFn,
}

impl Checker<'_> {
    fn fail(&mut self, check: &str, detail: String) {
        self.failures.push(Counterexample {
            instance: self.instance,
            seed: self.seed,
            check: check.into(),
            detail,
        });
    }

    fn check(&mut self, check: &str, ok: Option<String>) {
        self.checks += 1;
        if let Some(detail) = ok {
            self.fail(check, detail);
        }
    }

    fn beam_at(&mut self, inst: &Instance, params: &BeamParams) -> Option<QuantResult> {
        match (self.beam)(&inst.x, &inst.set, params) {
            Ok(r) => {
                let levels = inst.set.levels();
                self.check(
                    "self-consistency",
                    self_consistency(&inst.x, &inst.set, &r, levels),
                );
                Some(r)
            }
            Err(e) => {
                self.checks += 1;
                self.fail(
                    "beam",
                    format!("B={} k={}: {e}", params.beam_size, params.search_k),
                );
                None
            }
        }
    }

    fn run(&mut self, inst: &Instance, guard: u128) -> rvq_core::Result<f64> {
        let levels = inst.set.levels();
        let size = inst.set.max_size();
        let oracle = encode_exhaustive_with_guard(&inst.x, &inst.set, levels, guard)?;
        self.check(
            "self-consistency",
            self_consistency(&inst.x, &inst.set, &oracle, levels),
        );

        let greedy = encode_greedy(&inst.x, &inst.set, levels)?;
        self.check(
            "self-consistency",
            self_consistency(&inst.x, &inst.set, &greedy, levels),
        );
        if let Some(b1) = self.beam_at(inst, &BeamParams::new(1, levels).with_search_k(1)) {
            let ok = (!same_bits(&b1, &greedy)).then(|| {
                format!(
                    "beam(1,1) {:?} vs greedy {:?}",
                    b1.codes.indices(),
                    greedy.codes.indices()
                )
            });
            self.check("greedy-equivalence", ok);
        }

        for b in GRID_BEAMS {
            for k in GRID_SEARCH_K {
                if let Some(r) = self.beam_at(inst, &BeamParams::new(b, levels).with_search_k(k)) {
                    let ok = (r.sq_err < oracle.sq_err).then(|| {
                        format!(
                            "B={b} k={k}: beam error {} below oracle {}",
                            r.sq_err, oracle.sq_err
                        )
                    });
                    self.check("oracle-bound", ok);
                }
            }
        }

        let wide = size.pow(levels.saturating_sub(1) as u32);
        if let Some(r) = self.beam_at(inst, &BeamParams::new(wide, levels).with_search_k(size)) {
            let ok = (r.sq_err.to_bits() != oracle.sq_err.to_bits() || r.codes != oracle.codes)
                .then(|| {
                    format!(
                        "B={wide} k={size}: beam {:?} err {} vs oracle {:?} err {}",
                        r.codes.indices(),
                        r.sq_err,
                        oracle.codes.indices(),
                        oracle.sq_err
                    )
                });
            self.check("lossless-beam", ok);
        }
        Ok(oracle.l2_err)
    }
}

/// Checks `beam` against greedy and exhaustive search on `cfg.instances`
/// seeded instances. Instance 0 is the fixed scalar example; instance `i`
/// uses seed `cfg.seed + i`, and every fourth instance has tied distances.
pub fn run_oracle_check_with(cfg: &OracleConfig, beam: &BeamFn) -> CliResult<OracleSummary> {
    let combos = (cfg.size as u128)
        .checked_pow(cfg.levels as u32)
        .unwrap_or(u128::MAX);
    if combos > cfg.guard {
        return Err(CliError::Usage(format!(
            "S^L = {combos} exceeds the exhaustive-search guard {}",
            cfg.guard
        )));
    }
    let outcomes: Vec<CliResult<(usize, Vec<Counterexample>, f64)>> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i as u64);
            let inst = if i == 0 {
                scalar_example()
            } else {
                random_instance(seed, cfg.levels, cfg.size, cfg.dim, i % 4 == 0)
            };
            let mut c = Checker {
                instance: i,
                seed,
                checks: 0,
                failures: Vec::new(),
                beam,
            };
            let err = c.run(&inst, cfg.guard).map_err(|e| match e {
                RvqError::Capacity { .. } => CliError::Usage(e.to_string()),
                e => CliError::Runtime(e.into()),
            })?;
            Ok((c.checks, c.failures, err))
        })
        .collect();

    let mut summary = OracleSummary {
        instances: cfg.instances,
        checks: 0,
        scalar_example_error: f64::NAN,
        failures: Vec::new(),
    };
    for (i, o) in outcomes.into_iter().enumerate() {
        let (checks, failures, err) = o?;
        summary.checks += checks;
        summary.failures.extend(failures);
        if i == 0 {
            summary.scalar_example_error = err;
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 500, value_parser = positive)]
    pub instances: usize,
    #[arg(short = 'L', long = "levels", default_value_t = 3, value_parser = positive)]
    pub levels: usize,
    #[arg(short = 'S', long = "size", default_value_t = 5, value_parser = positive)]
    pub size: usize,
    #[arg(short = 'D', long = "dim", default_value_t = 2, value_parser = positive)]
    pub dim: usize,
    /// Largest number of code paths the exhaustive search may enumerate.
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_GUARD)]
    pub guard: u128,
    /// Write the summary as JSON.
    #[arg(short = 'o', long = "out")]
    pub out: Option<std::path::PathBuf>,
}

pub fn cmd(g: &GlobalArgs, a: OracleArgs) -> CliResult<()> {
    let cfg = OracleConfig {
        seed: g.seed,
        instances: a.instances,
        levels: a.levels,
        size: a.size,
        dim: a.dim,
        guard: a.guard,
    };
    let summary = run_oracle_check(&cfg)?;
    if let Some(out) = &a.out {
        write_json(out, &summary)?;
    }
    println!(
        "{} instances (L={} S={} D={}), {} checks, scalar example oracle error {:.6}",
        summary.instances,
        cfg.levels,
        cfg.size,
        cfg.dim,
        summary.checks,
        summary.scalar_example_error
    );
    if summary.passed() {
        println!("pass");
        return Ok(());
    }
    for f in &summary.failures {
        println!(
            "FAIL instance {} seed {}: {}: {}",
            f.instance, f.seed, f.check, f.detail
        );
    }
    let mut seeds: Vec<u64> = summary.failures.iter().map(|f| f.seed).collect();
    seeds.dedup();
    Err(anyhow::anyhow!(
        "{} failed checks; counterexample seeds: {seeds:?}",
        summary.failures.len()
    )
    .into())
}
