//! Residual quantization encoders.
//!
//! Three encoders share one objective, the squared distance between the input
//! and the sum of the chosen code vectors:
//!
//! * [`encode_greedy`] picks the nearest code to the running residual at each
//!   level (the conventional RVQ encoder).
//! * [`encode_beam`] keeps the `B` lowest-error partial code paths per level,
//!   expanding each with the `k` codes nearest to its own residual.
//! * [`encode_exhaustive`] enumerates every code path; only usable on small
//!   instances, it serves as the optimality oracle.
//!
//! Candidates are ordered by `(squared error, index path)`, both ascending.
//! That total order fixes every tie, so all encoders are deterministic and
//! `encode_beam` with `B = k = 1` reproduces `encode_greedy` bit for bit.
//! The tie rule is a choice of this crate; other RVQ implementations may order
//! equal-error candidates differently.

mod batch;
mod codes;
mod grouped;

pub use batch::{encode_batch, encode_batch_with, ExecMode};
pub use codes::{read_jsonl, read_packed, write_jsonl, write_packed};
pub use grouped::{encode_grvq, grvq_decode};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::codebooks::{Codebook, CodebookSet};
use crate::error::{Result, RvqError};
use crate::metrics::sq_dist;

/// Default cap on the number of code paths [`encode_exhaustive`] may visit.
pub const DEFAULT_EXHAUSTIVE_GUARD: u128 = 10_000_000;

/// Per-level codebook indices; `n_q` is the number of levels used.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "codes::CodeRecord", into = "codes::CodeRecord")]
pub struct CodeSequence {
    indices: Vec<u32>,
}

impl CodeSequence {
    pub fn new(indices: Vec<u32>) -> Self {
        Self { indices }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn n_q(&self) -> usize {
        self.indices.len()
    }
}

impl From<Vec<u32>> for CodeSequence {
    fn from(indices: Vec<u32>) -> Self {
        Self::new(indices)
    }
}

/// A partial candidate inside the beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamNode {
    /// Sum of the code vectors named by `path`, accumulated level by level.
    pub acc: Vec<f64>,
    pub path: Vec<u32>,
    /// `|x - acc|^2`.
    pub sq_err: f64,
}

/// Output of an encoder for one input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantResult {
    pub codes: CodeSequence,
    pub quantized: Vec<f64>,
    pub sq_err: f64,
    pub l2_err: f64,
}

impl QuantResult {
    fn from_parts(x: &[f64], path: Vec<u32>, quantized: Vec<f64>) -> Self {
        let sq_err = sq_dist(x, &quantized);
        Self {
            codes: CodeSequence::new(path),
            quantized,
            sq_err,
            l2_err: sq_err.sqrt(),
        }
    }
}

/// Beam width `B`, per-node fan-out `k` and number of levels `n_q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamParams {
    pub beam_size: usize,
    pub search_k: usize,
    pub levels: usize,
}

impl BeamParams {
    /// `k` defaults to the beam size.
    pub fn new(beam_size: usize, levels: usize) -> Self {
        Self {
            beam_size,
            search_k: beam_size,
            levels,
        }
    }

    pub fn with_search_k(mut self, search_k: usize) -> Self {
        self.search_k = search_k;
        self
    }

    pub fn greedy(levels: usize) -> Self {
        Self::new(1, levels)
    }

    fn validate(&self) -> Result<()> {
        if self.beam_size == 0 {
            return Err(RvqError::arg("beam size must be at least 1"));
        }
        if self.search_k == 0 {
            return Err(RvqError::arg("search k must be at least 1"));
        }
        Ok(())
    }
}

/// Encoder selection for batch and pipeline APIs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Strategy {
    Greedy,
    Beam { beam_size: usize, search_k: usize },
    Exhaustive,
}

impl Strategy {
    pub fn beam(beam_size: usize) -> Self {
        Strategy::Beam {
            beam_size,
            search_k: beam_size,
        }
    }

    pub fn encode(&self, x: &[f64], set: &CodebookSet, n_q: usize) -> Result<QuantResult> {
        match *self {
            Strategy::Greedy => encode_greedy(x, set, n_q),
            Strategy::Beam {
                beam_size,
                search_k,
            } => encode_beam(
                x,
                set,
                &BeamParams::new(beam_size, n_q).with_search_k(search_k),
            ),
            Strategy::Exhaustive => encode_exhaustive(x, set, n_q),
        }
    }
}

/// The `min(k, S)` entries nearest to `query`, as `(index, squared distance)`
/// sorted by distance then index.
pub fn top_k_nearest(query: &[f64], codebook: &Codebook, k: usize) -> Result<Vec<(usize, f64)>> {
    if query.len() != codebook.dim() {
        return Err(RvqError::arg(format!(
            "query has dim {}, codebook level {} has dim {}",
            query.len(),
            codebook.level(),
            codebook.dim()
        )));
    }
    if k == 0 {
        return Err(RvqError::arg("k must be at least 1"));
    }
    Ok(top_k_unchecked(query, codebook, k))
}

fn by_dist_then_index(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

fn top_k_unchecked(query: &[f64], codebook: &Codebook, k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = codebook
        .rows()
        .enumerate()
        .map(|(i, row)| (i, sq_dist(query, row)))
        .collect();
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, by_dist_then_index);
        all.truncate(k);
    }
    all.sort_unstable_by(by_dist_then_index);
    all
}

/// Nearest entry to `query`; ties go to the smaller index.
pub(crate) fn nearest(query: &[f64], codebook: &Codebook) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, row) in codebook.rows().enumerate() {
        let d = sq_dist(query, row);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn check_input(x: &[f64], set: &CodebookSet, n_q: usize) -> Result<()> {
    if x.len() != set.dim() {
        return Err(RvqError::arg(format!(
            "input has dim {}, codebooks have dim {}",
            x.len(),
            set.dim()
        )));
    }
    if n_q == 0 || n_q > set.levels() {
        return Err(RvqError::arg(format!(
            "n_q = {n_q} is outside [1, {}]",
            set.levels()
        )));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(RvqError::arg(format!("input component {i} is not finite")));
    }
    Ok(())
}

#[inline]
fn add_into(out: &mut [f64], a: &[f64], b: &[f64]) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = x + y;
    }
}

/// Sum of the selected code vectors, accumulated from level 1 upwards.
pub fn decode(codes: &CodeSequence, set: &CodebookSet) -> Result<Vec<f64>> {
    if codes.n_q() == 0 || codes.n_q() > set.levels() {
        return Err(RvqError::arg(format!(
            "code sequence has {} levels, codebooks have {}",
            codes.n_q(),
            set.levels()
        )));
    }
    let mut acc = vec![0.0; set.dim()];
    for (pos, &idx) in codes.indices().iter().enumerate() {
        let cb = set.codebook(pos);
        if idx as usize >= cb.size() {
            return Err(RvqError::arg(format!(
                "index {idx} at level {} is out of range (S = {})",
                pos + 1,
                cb.size()
            )));
        }
        for (a, c) in acc.iter_mut().zip(cb.entry(idx as usize)) {
            *a += c;
        }
    }
    Ok(acc)
}

/// Conventional RVQ encoding: nearest code to the running residual per level.
pub fn encode_greedy(x: &[f64], set: &CodebookSet, n_q: usize) -> Result<QuantResult> {
    check_input(x, set, n_q)?;
    let mut acc = vec![0.0; x.len()];
    let mut residual = vec![0.0; x.len()];
    let mut path = Vec::with_capacity(n_q);
    for cb in &set.codebooks()[..n_q] {
        for ((r, xv), a) in residual.iter_mut().zip(x).zip(&acc) {
            *r = xv - a;
        }
        let (idx, _) = nearest(&residual, cb);
        for (a, c) in acc.iter_mut().zip(cb.entry(idx)) {
            *a += c;
        }
        path.push(idx as u32);
    }
    Ok(QuantResult::from_parts(x, path, acc))
}

/// Beam-search encoding; returns the best node of the final beam.
pub fn encode_beam(x: &[f64], set: &CodebookSet, params: &BeamParams) -> Result<QuantResult> {
    let beam = run_beam(x, set, params, |_| {})?;
    let best = beam.into_iter().next().expect("beam is never empty");
    Ok(QuantResult {
        codes: CodeSequence::new(best.path),
        l2_err: best.sq_err.sqrt(),
        sq_err: best.sq_err,
        quantized: best.acc,
    })
}

/// Runs the beam search and returns the pruned beam after every level.
pub fn encode_beam_trace(
    x: &[f64],
    set: &CodebookSet,
    params: &BeamParams,
) -> Result<Vec<Vec<BeamNode>>> {
    let mut levels = Vec::with_capacity(params.levels);
    run_beam(x, set, params, |beam| levels.push(beam.to_vec()))?;
    Ok(levels)
}

struct Candidate {
    sq_err: f64,
    parent: usize,
    code: u32,
}

fn run_beam(
    x: &[f64],
    set: &CodebookSet,
    params: &BeamParams,
    mut on_level: impl FnMut(&[BeamNode]),
) -> Result<Vec<BeamNode>> {
    params.validate()?;
    check_input(x, set, params.levels)?;
    let dim = x.len();

    let mut beam = vec![BeamNode {
        acc: vec![0.0; dim],
        path: Vec::new(),
        sq_err: sq_dist(x, &vec![0.0; dim]),
    }];
    let mut residual = vec![0.0; dim];
    let mut node = vec![0.0; dim];
    let mut pool: Vec<Candidate> = Vec::new();

    for (level, cb) in set.codebooks()[..params.levels].iter().enumerate() {
        // The first level seeds the beam straight from x with B codes.
        let fan_out = if level == 0 {
            params.beam_size
        } else {
            params.search_k
        };
        pool.clear();
        for (j, parent) in beam.iter().enumerate() {
            for ((r, xv), a) in residual.iter_mut().zip(x).zip(&parent.acc) {
                *r = xv - a;
            }
            for (code, _) in top_k_unchecked(&residual, cb, fan_out) {
                add_into(&mut node, &parent.acc, cb.entry(code));
                pool.push(Candidate {
                    sq_err: sq_dist(x, &node),
                    parent: j,
                    code: code as u32,
                });
            }
        }

        let order = |a: &Candidate, b: &Candidate| {
            a.sq_err
                .total_cmp(&b.sq_err)
                .then_with(|| beam[a.parent].path.cmp(&beam[b.parent].path))
                .then(a.code.cmp(&b.code))
        };
        if pool.len() > params.beam_size {
            pool.select_nth_unstable_by(params.beam_size - 1, order);
            pool.truncate(params.beam_size);
        }
        pool.sort_unstable_by(order);

        let next: Vec<BeamNode> = pool
            .iter()
            .map(|c| {
                let parent = &beam[c.parent];
                let mut acc = vec![0.0; dim];
                add_into(&mut acc, &parent.acc, cb.entry(c.code as usize));
                let mut path = Vec::with_capacity(level + 1);
                path.extend_from_slice(&parent.path);
                path.push(c.code);
                BeamNode {
                    acc,
                    path,
                    sq_err: c.sq_err,
                }
            })
            .collect();
        beam = next;
        on_level(&beam);
    }
    Ok(beam)
}

/// Global minimizer over all code paths, with the default guard.
pub fn encode_exhaustive(x: &[f64], set: &CodebookSet, n_q: usize) -> Result<QuantResult> {
    encode_exhaustive_with_guard(x, set, n_q, DEFAULT_EXHAUSTIVE_GUARD)
}

/// Enumerates every code path in lexicographic order and keeps the first one
/// reaching the minimum error. Fails with [`RvqError::Capacity`] when the path
/// count exceeds `guard`.
pub fn encode_exhaustive_with_guard(
    x: &[f64],
    set: &CodebookSet,
    n_q: usize,
    guard: u128,
) -> Result<QuantResult> {
    check_input(x, set, n_q)?;
    let required = set.codebooks()[..n_q]
        .iter()
        .fold(1u128, |p, cb| p.saturating_mul(cb.size() as u128));
    if required > guard {
        return Err(RvqError::Capacity { required, guard });
    }

    let dim = x.len();
    let books = &set.codebooks()[..n_q];
    // accs[d] is the sum of the first d chosen codes.
    let mut accs = vec![vec![0.0; dim]; n_q + 1];
    let mut path = vec![0u32; n_q];
    let mut best_err = f64::INFINITY;
    let mut best_path = path.clone();

    let mut depth = 0;
    let mut next = vec![0usize; n_q];
    loop {
        if next[depth] == books[depth].size() {
            if depth == 0 {
                break;
            }
            next[depth] = 0;
            depth -= 1;
            continue;
        }
        let idx = next[depth];
        next[depth] += 1;
        path[depth] = idx as u32;
        let (lo, hi) = accs.split_at_mut(depth + 1);
        add_into(&mut hi[0], &lo[depth], books[depth].entry(idx));
        if depth + 1 == n_q {
            let e = sq_dist(x, &accs[n_q]);
            if e < best_err {
                best_err = e;
                best_path.copy_from_slice(&path);
            }
        } else {
            depth += 1;
        }
    }

    let quantized = decode(&CodeSequence::new(best_path.clone()), set)?;
    Ok(QuantResult::from_parts(x, best_path, quantized))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar codebooks consistent with the classic "greedy RVQ is suboptimal"
    /// example: x = 2.13, levels {1, 3}, {0, 1}, {0, 0.1}.
    fn scalar_example() -> CodebookSet {
        CodebookSet::from_tables(1, vec![vec![1.0, 3.0], vec![0.0, 1.0], vec![0.0, 0.1]]).unwrap()
    }

    #[test]
    fn top_k_on_scalar_level_one() {
        let set = scalar_example();
        let got = top_k_nearest(&[2.13], set.codebook(0), 2).unwrap();
        assert_eq!(got[0].0, 1);
        assert_eq!(got[1].0, 0);
        assert!((got[0].1 - 0.7569).abs() < 1e-12);
        assert!((got[1].1 - 1.2769).abs() < 1e-12);
    }

    #[test]
    fn top_k_exact_match_and_clamp() {
        let set = CodebookSet::generate_random(3, 1, 6, 4, 1.0).unwrap();
        let cb = set.codebook(0);
        let got = top_k_nearest(cb.entry(3), cb, 1).unwrap();
        assert_eq!(got, vec![(3, 0.0)]);
        assert_eq!(top_k_nearest(cb.entry(0), cb, 50).unwrap().len(), 6);
        assert!(top_k_nearest(&[0.0; 3], cb, 1).is_err());
        assert!(top_k_nearest(&[0.0; 4], cb, 0).is_err());
    }

    #[test]
    fn top_k_ties_prefer_smaller_index() {
        let set = CodebookSet::from_tables(1, vec![vec![2.0, 0.0, -2.0, 2.0]]).unwrap();
        let got = top_k_nearest(&[0.0], set.codebook(0), 4).unwrap();
        let idx: Vec<usize> = got.iter().map(|p| p.0).collect();
        assert_eq!(idx, vec![1, 0, 2, 3]);
    }

    #[test]
    fn greedy_on_scalar_example() {
        let r = encode_greedy(&[2.13], &scalar_example(), 3).unwrap();
        assert_eq!(r.quantized, vec![3.0]);
        assert_eq!(r.codes.indices(), &[1, 0, 0]);
        assert!((r.l2_err - 0.87).abs() < 1e-12);
    }

    #[test]
    fn beam_two_finds_the_better_path() {
        let r = encode_beam(&[2.13], &scalar_example(), &BeamParams::new(2, 3)).unwrap();
        assert_eq!(r.codes.indices(), &[0, 1, 1]);
        assert!((r.quantized[0] - 2.1).abs() < 1e-12);
        assert!((r.l2_err - 0.03).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_on_scalar_example() {
        let r = encode_exhaustive(&[2.13], &scalar_example(), 3).unwrap();
        assert_eq!(r.codes.indices(), &[0, 1, 1]);
        assert!((r.l2_err - 0.03).abs() < 1e-12);
    }

    #[test]
    fn beam_trace_levels_have_expected_sizes() {
        let set = scalar_example();
        let trace = encode_beam_trace(&[2.13], &set, &BeamParams::new(2, 3)).unwrap();
        assert_eq!(trace.len(), 3);
        assert!(trace.iter().all(|b| b.len() == 2));
        // level-2 survivors: 1+1 (err 0.0169) and 3+0 (err 0.7569)
        assert_eq!(trace[1][0].path, vec![0, 1]);
        assert_eq!(trace[1][1].path, vec![1, 0]);
    }

    #[test]
    fn large_beam_keeps_whole_pool() {
        let set = CodebookSet::generate_random(5, 3, 3, 2, 1.0).unwrap();
        let trace = encode_beam_trace(&[0.3, -0.2], &set, &BeamParams::new(100, 3)).unwrap();
        let sizes: Vec<usize> = trace.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 9, 27]);
    }

    #[test]
    fn decode_checks_indices() {
        let set = scalar_example();
        assert_eq!(
            decode(&CodeSequence::new(vec![1]), &set).unwrap(),
            vec![3.0]
        );
        assert!(decode(&CodeSequence::new(vec![2]), &set).is_err());
        assert!(decode(&CodeSequence::new(vec![0, 0, 0, 0]), &set).is_err());
        assert!(decode(&CodeSequence::new(vec![]), &set).is_err());
    }

    #[test]
    fn argument_errors() {
        let set = scalar_example();
        assert!(encode_greedy(&[1.0, 2.0], &set, 1).is_err());
        assert!(encode_greedy(&[1.0], &set, 0).is_err());
        assert!(encode_greedy(&[1.0], &set, 4).is_err());
        assert!(encode_greedy(&[f64::NAN], &set, 1).is_err());
        assert!(encode_beam(&[1.0], &set, &BeamParams::new(2, 4)).is_err());
        assert!(encode_beam(&[1.0], &set, &BeamParams::new(0, 2)).is_err());
        assert!(encode_beam(&[1.0], &set, &BeamParams::new(2, 2).with_search_k(0)).is_err());
    }

    #[test]
    fn exhaustive_guard_is_a_capacity_error() {
        let set = CodebookSet::generate_random(1, 4, 16, 2, 1.0).unwrap();
        match encode_exhaustive_with_guard(&[0.0, 0.0], &set, 4, 1000) {
            Err(RvqError::Capacity { required, guard }) => {
                assert_eq!(required, 65536);
                assert_eq!(guard, 1000);
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
        assert!(encode_exhaustive_with_guard(&[0.0, 0.0], &set, 2, 1000).is_ok());
    }

    #[test]
    fn single_level_exhaustive_is_greedy() {
        let set = CodebookSet::generate_random(9, 1, 10, 3, 1.0).unwrap();
        let x = [0.4, -1.0, 0.2];
        assert_eq!(
            encode_exhaustive(&x, &set, 1).unwrap(),
            encode_greedy(&x, &set, 1).unwrap()
        );
    }

    #[test]
    fn zero_error_when_input_is_a_code() {
        let mut tables = vec![vec![0.5, 1.5, -2.0, 4.0]];
        tables.push(vec![0.3, 0.0, -0.7]);
        tables.push(vec![0.0, 0.2]);
        let set = CodebookSet::from_tables(1, tables).unwrap();
        let r = encode_greedy(&[-2.0], &set, 3).unwrap();
        assert_eq!(r.sq_err, 0.0);
        assert_eq!(r.codes.indices(), &[2, 1, 0]);
    }

    #[test]
    fn strategy_dispatch() {
        let set = scalar_example();
        let g = Strategy::Greedy.encode(&[2.13], &set, 3).unwrap();
        let b = Strategy::beam(1).encode(&[2.13], &set, 3).unwrap();
        let e = Strategy::Exhaustive.encode(&[2.13], &set, 3).unwrap();
        assert_eq!(g, b);
        assert_eq!(e.codes.indices(), &[0, 1, 1]);
    }
}
