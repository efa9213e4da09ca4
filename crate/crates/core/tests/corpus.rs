// SPDX-License-Identifier: Apache-2.0

use std::fs;

use poco_core::corpus::{content_hash, ingest_corpus, read_manifest, write_manifest, write_seeds, CorpusError};
use poco_core::Seed;

#[test]
fn empty_directory_is_an_error() {
    let d = tempfile::tempdir().unwrap();
    assert!(matches!(ingest_corpus(d.path()), Err(CorpusError::Empty)));
    fs::write(d.path().join(".hidden"), "x").unwrap();
    assert!(matches!(ingest_corpus(d.path()), Err(CorpusError::Empty)));
}

#[test]
fn files_are_sorted_by_stem() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("b.bin"), "bb").unwrap();
    fs::write(d.path().join("c"), "").unwrap();
    fs::write(d.path().join("a.txt"), "a").unwrap();
    fs::create_dir(d.path().join("sub")).unwrap();
    let c = ingest_corpus(d.path()).unwrap();
    let ids: Vec<&str> = c.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids, vec!["a", "b", "c"]);
    assert_eq!(c[1].size(), 2);
}

#[test]
fn duplicate_stems_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("x.a"), "1").unwrap();
    fs::write(d.path().join("x.b"), "2").unwrap();
    match ingest_corpus(d.path()) {
        Err(CorpusError::DuplicateStem { id, .. }) => assert_eq!(id, "x"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn manifest_round_trip_and_resolution() {
    let d = tempfile::tempdir().unwrap();
    let seeds = vec![Seed::new("s1", "abcde"), Seed::new("s3", "")];
    let path = d.path().join("m.json");
    write_manifest(&seeds, &path).unwrap();
    let m = read_manifest(&path).unwrap();
    assert_eq!(m.schema_version, poco_core::SCHEMA_VERSION);
    assert_eq!(m.ids(), vec!["s1", "s3"]);
    assert_eq!(m.seeds[1].sha256, content_hash(b""));
    assert_eq!(m.resolve(&seeds).unwrap(), seeds);
    assert!(m.resolve(&[Seed::new("s1", "abcdX"), Seed::new("s3", "")]).is_err());

    let out = d.path().join("seeds");
    write_seeds(&seeds, &out).unwrap();
    assert_eq!(ingest_corpus(&out).unwrap(), seeds);
}

#[test]
fn malformed_manifest_is_reported() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("m.json");
    fs::write(&p, "{").unwrap();
    assert!(matches!(read_manifest(&p), Err(CorpusError::Manifest { .. })));
}
