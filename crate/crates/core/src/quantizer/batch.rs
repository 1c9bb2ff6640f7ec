use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{encode_beam, BeamParams, QuantResult, Strategy};
use crate::codebooks::CodebookSet;
use crate::error::{Result, RvqError};

/// How a batch is scheduled. Both modes return identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    Sequential,
    Parallel,
}

/// Beam-encodes every vector in `xs`, in input order.
pub fn encode_batch<V: AsRef<[f64]> + Sync>(
    xs: &[V],
    set: &CodebookSet,
    params: &BeamParams,
    mode: ExecMode,
) -> Result<Vec<QuantResult>> {
    run(xs, mode, |x| encode_beam(x, set, params))
}

/// Like [`encode_batch`] with any encoder strategy.
pub fn encode_batch_with<V: AsRef<[f64]> + Sync>(
    xs: &[V],
    set: &CodebookSet,
    strategy: Strategy,
    n_q: usize,
    mode: ExecMode,
) -> Result<Vec<QuantResult>> {
    run(xs, mode, |x| strategy.encode(x, set, n_q))
}

fn run<V, F>(xs: &[V], mode: ExecMode, f: F) -> Result<Vec<QuantResult>>
where
    V: AsRef<[f64]> + Sync,
    F: Fn(&[f64]) -> Result<QuantResult> + Sync,
{
    let results: Vec<Result<QuantResult>> = match mode {
        ExecMode::Sequential => xs.iter().map(|x| f(x.as_ref())).collect(),
        ExecMode::Parallel => xs.par_iter().map(|x| f(x.as_ref())).collect(),
    };
    // Report the lowest failing index regardless of scheduling.
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| RvqError::at(i, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_batch() {
        let set = CodebookSet::generate_random(1, 2, 4, 3, 1.0).unwrap();
        let xs: Vec<Vec<f64>> = Vec::new();
        for mode in [ExecMode::Sequential, ExecMode::Parallel] {
            assert!(encode_batch(&xs, &set, &BeamParams::new(4, 2), mode)
                .unwrap()
                .is_empty());
        }
    }

    #[test]
    fn modes_agree() {
        let set = CodebookSet::generate_random(2, 4, 8, 3, 1.0).unwrap();
        let data = CodebookSet::generate_random(3, 1, 64, 3, 1.5).unwrap();
        let xs: Vec<&[f64]> = data.codebook(0).rows().collect();
        let p = BeamParams::new(4, 4);
        let a = encode_batch(&xs, &set, &p, ExecMode::Sequential).unwrap();
        let b = encode_batch(&xs, &set, &p, ExecMode::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn error_carries_first_bad_index() {
        let set = CodebookSet::generate_random(2, 2, 4, 2, 1.0).unwrap();
        let xs = vec![vec![0.0, 0.0], vec![0.0], vec![1.0, 0.0], vec![1.0]];
        for mode in [ExecMode::Sequential, ExecMode::Parallel] {
            match encode_batch(&xs, &set, &BeamParams::new(2, 2), mode) {
                Err(RvqError::Item { index, source }) => {
                    assert_eq!(index, 1);
                    assert!(matches!(*source, RvqError::Argument(_)));
                }
                other => panic!("expected an item error, got {other:?}"),
            }
        }
    }
}
