//! Code sequence serialization: JSON lines and a packed little-endian form.
//!
//! Packed layout per sample: `u16 n_q` followed by `n_q` `u32` indices.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::CodeSequence;
use crate::error::{Result, RvqError};

#[derive(Serialize, Deserialize)]
pub(super) struct CodeRecord {
    n_q: usize,
    indices: Vec<u32>,
}

impl From<CodeSequence> for CodeRecord {
    fn from(c: CodeSequence) -> Self {
        Self {
            n_q: c.indices.len(),
            indices: c.indices,
        }
    }
}

impl TryFrom<CodeRecord> for CodeSequence {
    type Error = String;

    fn try_from(r: CodeRecord) -> std::result::Result<Self, String> {
        if r.n_q != r.indices.len() {
            return Err(format!(
                "n_q is {} but {} indices are listed",
                r.n_q,
                r.indices.len()
            ));
        }
        Ok(CodeSequence::new(r.indices))
    }
}

pub fn write_packed<W: Write>(codes: &[CodeSequence], mut w: W) -> Result<()> {
    for (i, c) in codes.iter().enumerate() {
        let n_q = u16::try_from(c.n_q())
            .map_err(|_| RvqError::at(i, RvqError::format("n_q", "more than 65535 levels")))?;
        let mut buf = Vec::with_capacity(2 + 4 * c.n_q());
        buf.extend_from_slice(&n_q.to_le_bytes());
        for idx in c.indices() {
            buf.extend_from_slice(&idx.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_packed<R: Read>(mut r: R) -> Result<Vec<CodeSequence>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let sample = out.len();
        let head = bytes
            .get(pos..pos + 2)
            .ok_or_else(|| RvqError::at(sample, RvqError::format("n_q", "truncated header")))?;
        let n_q = u16::from_le_bytes([head[0], head[1]]) as usize;
        pos += 2;
        let body = bytes.get(pos..pos + 4 * n_q).ok_or_else(|| {
            RvqError::at(sample, RvqError::format("indices", "truncated indices"))
        })?;
        let indices = body
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        pos += 4 * n_q;
        out.push(CodeSequence::new(indices));
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(codes: &[CodeSequence], mut w: W) -> Result<()> {
    for c in codes {
        let line =
            serde_json::to_string(c).map_err(|e| RvqError::format("jsonl", e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<CodeSequence>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let c = serde_json::from_str(&line)
            .map_err(|e| RvqError::at(i, RvqError::format("jsonl", e.to_string())))?;
        out.push(c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn json_shape() {
        let c = CodeSequence::new(vec![3, 0, 7]);
        assert_eq!(
            serde_json::to_string(&c).unwrap(),
            r#"{"n_q":3,"indices":[3,0,7]}"#
        );
        assert!(serde_json::from_str::<CodeSequence>(r#"{"n_q":2,"indices":[1]}"#).is_err());
    }

    #[test]
    fn packed_bytes() {
        let mut buf = Vec::new();
        write_packed(&[CodeSequence::new(vec![1, 258])], &mut buf).unwrap();
        assert_eq!(buf, vec![2, 0, 1, 0, 0, 0, 2, 1, 0, 0]);
        assert!(read_packed(&buf[..buf.len() - 1]).is_err());
        assert!(read_packed(&buf[..1]).is_err());
    }

    proptest! {
        #[test]
        fn packed_and_jsonl_roundtrip(seqs in prop::collection::vec(prop::collection::vec(any::<u32>(), 0..12), 0..20)) {
            let codes: Vec<CodeSequence> = seqs.into_iter().map(CodeSequence::new).collect();
            let mut packed = Vec::new();
            write_packed(&codes, &mut packed).unwrap();
            prop_assert_eq!(&read_packed(packed.as_slice()).unwrap(), &codes);
            let mut jl = Vec::new();
            write_jsonl(&codes, &mut jl).unwrap();
            prop_assert_eq!(&read_jsonl(jl.as_slice()).unwrap(), &codes);
        }
    }
}
