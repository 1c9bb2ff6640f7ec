use std::path::PathBuf;

use rvq_core::{CodebookSet, RvqError};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/seed7_l3_s8_d4.rvqc")
}

fn golden_set() -> CodebookSet {
    CodebookSet::generate_random(7, 3, 8, 4, 1.0).unwrap()
}

/// Rewrites the fixture. Run only when the generator is changed on purpose.
#[test]
#[ignore]
fn regenerate_golden_fixture() {
    golden_set().save(fixture()).unwrap();
}

#[test]
fn committed_fixture_matches_generator() {
    let loaded = CodebookSet::load(fixture()).unwrap();
    assert_eq!(loaded.levels(), 3);
    assert_eq!(loaded.uniform_size(), Some(8));
    assert_eq!(loaded.dim(), 4);
    assert_eq!(loaded, golden_set());
}

#[test]
fn snapshot_values() {
    let set = golden_set();
    let first = set.codebook(0).entry(0);
    let last = set.codebook(2).entry(7);
    let as_f32 = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<_>>();
    assert_eq!(
        as_f32(first),
        vec![-0.775_371_9, -1.383_421_8, 0.889_713, 0.359_779_06]
    );
    assert_eq!(
        as_f32(last),
        vec![0.069_997_86, -0.200_721_35, 1.552_008_3, -0.366_204_68]
    );
}

#[test]
fn fixture_bytes_are_stable() {
    let mut bytes = Vec::new();
    golden_set().write_to(&mut bytes).unwrap();
    assert_eq!(bytes, std::fs::read(fixture()).unwrap());
    assert_eq!(&bytes[..4], b"RVQC");
    assert_eq!(bytes.len(), 20 + 3 * 8 * 4 * 4);
}

#[test]
fn save_load_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let set = CodebookSet::generate_random(99, 5, 16, 6, 2.5).unwrap();
    let p = dir.path().join("cb.rvqc");
    set.save(&p).unwrap();
    assert_eq!(CodebookSet::load(&p).unwrap(), set);
}

#[test]
fn wrong_magic_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.rvqc");
    let mut bytes = std::fs::read(fixture()).unwrap();
    bytes[..4].copy_from_slice(b"NOPE");
    std::fs::write(&p, bytes).unwrap();
    assert!(matches!(
        CodebookSet::load(&p),
        Err(RvqError::Format { field: "magic", .. })
    ));
}
