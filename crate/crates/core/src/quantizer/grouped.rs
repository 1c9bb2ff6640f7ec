use super::{decode, encode_beam, BeamParams, CodeSequence, QuantResult};
use crate::codebooks::GroupedCodebookSet;
use crate::error::{Result, RvqError};

/// Splits `x` by the group dimensions and beam-encodes each slice independently.
pub fn encode_grvq(
    x: &[f64],
    gset: &GroupedCodebookSet,
    params: &BeamParams,
) -> Result<Vec<QuantResult>> {
    if x.len() != gset.total_dim() {
        return Err(RvqError::arg(format!(
            "input has dim {}, groups cover {}",
            x.len(),
            gset.total_dim()
        )));
    }
    let mut offset = 0;
    gset.groups()
        .iter()
        .enumerate()
        .map(|(g, set)| {
            let part = &x[offset..offset + set.dim()];
            offset += set.dim();
            encode_beam(part, set, params).map_err(|e| RvqError::at(g, e))
        })
        .collect()
}

/// Concatenates the per-group decodes in group order.
pub fn grvq_decode(codes: &[CodeSequence], gset: &GroupedCodebookSet) -> Result<Vec<f64>> {
    if codes.len() != gset.groups().len() {
        return Err(RvqError::arg(format!(
            "{} code sequences for {} groups",
            codes.len(),
            gset.groups().len()
        )));
    }
    let mut out = Vec::with_capacity(gset.total_dim());
    for (g, (c, set)) in codes.iter().zip(gset.groups()).enumerate() {
        out.extend(decode(c, set).map_err(|e| RvqError::at(g, e))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebooks::CodebookSet;

    fn scalar() -> CodebookSet {
        CodebookSet::from_tables(1, vec![vec![1.0, 3.0], vec![0.0, 1.0], vec![0.0, 0.1]]).unwrap()
    }

    #[test]
    fn two_scalar_groups_decode_by_hand() {
        let g = GroupedCodebookSet::new(vec![scalar(), scalar()]).unwrap();
        // 1 + 1 + 0.1 and 3 + 0 + 0
        let codes = vec![
            CodeSequence::new(vec![0, 1, 1]),
            CodeSequence::new(vec![1, 0, 0]),
        ];
        let out = grvq_decode(&codes, &g).unwrap();
        assert_eq!(out, vec![1.0 + 1.0 + 0.1, 3.0]);
        assert!((out[0] - 2.1).abs() < 1e-12);
    }

    #[test]
    fn single_group_matches_plain_encoder() {
        let set = CodebookSet::generate_random(4, 3, 8, 4, 1.0).unwrap();
        let g = GroupedCodebookSet::new(vec![set.clone()]).unwrap();
        let x = [0.1, 0.7, -0.3, 1.1];
        let p = BeamParams::new(3, 3);
        let grouped = encode_grvq(&x, &g, &p).unwrap();
        assert_eq!(grouped, vec![encode_beam(&x, &set, &p).unwrap()]);
        assert_eq!(
            grvq_decode(&[grouped[0].codes.clone()], &g).unwrap(),
            decode(&grouped[0].codes, &set).unwrap()
        );
    }

    #[test]
    fn symmetric_groups_give_identical_results() {
        let set = CodebookSet::generate_random(6, 3, 8, 2, 1.0).unwrap();
        let g = GroupedCodebookSet::new(vec![set.clone(), set]).unwrap();
        let r = encode_grvq(&[0.4, -0.9, 0.4, -0.9], &g, &BeamParams::new(4, 3)).unwrap();
        assert_eq!(r[0], r[1]);
    }

    #[test]
    fn mismatches_are_errors() {
        let g = GroupedCodebookSet::new(vec![scalar(), scalar()]).unwrap();
        assert!(encode_grvq(&[1.0], &g, &BeamParams::new(1, 1)).is_err());
        assert!(grvq_decode(&[CodeSequence::new(vec![0])], &g).is_err());
    }
}
