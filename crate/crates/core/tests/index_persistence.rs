use std::collections::HashSet;

use proptest::prelude::*;
use tabassist_core::index::{
    build_index, decode_index, encode_index, load_index, load_manifest, save_index, sha256_hex, Bm25Params,
    IndexManifest, PersistError, SearchField, FORMAT_VERSION,
};
use tabassist_core::kb::load_kb;
use tabassist_core::table::write_corpus;
use tabassist_testkit::synthetic;

fn built(seed: u64, exclude: &[&str]) -> (tabassist_core::index::TableIndex, Vec<tabassist_core::Table>) {
    let world = synthetic::world(seed);
    let kb = load_kb(world.kb_jsonl.as_bytes()).unwrap().store;
    let exclude: HashSet<String> = exclude.iter().map(|s| s.to_string()).collect();
    let index = build_index(&world.corpus, &kb, &exclude, Bm25Params::default());
    (index, world.corpus)
}

#[test]
fn save_and_load_round_trip() {
    let (index, corpus) = built(5, &["T001", "T002"]);
    let mut corpus_bytes = Vec::new();
    write_corpus(&mut corpus_bytes, &corpus).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest =
        IndexManifest::new(&index, sha256_hex(&corpus_bytes), sha256_hex(b"kb"), sha256_hex(b"T001\nT002\n"));
    let saved = save_index(dir.path(), &index, &manifest).unwrap();

    let (loaded, on_disk) = load_index(dir.path()).unwrap();
    assert_eq!(loaded, index);
    assert_eq!(on_disk, saved);
    assert_eq!(
        load_manifest(dir.path()).unwrap().index_sha256,
        sha256_hex(&std::fs::read(dir.path().join("index.bin")).unwrap())
    );
    assert_eq!(saved.format_version, FORMAT_VERSION);
    assert_eq!(saved.n_tables, corpus.len() - 2);

    let q = ["w1x2 league".to_string()];
    assert_eq!(loaded.search(SearchField::Caption, &q, 10), index.search(SearchField::Caption, &q, 10));
}

#[test]
fn encoding_is_deterministic_across_builds() {
    let (a, _) = built(9, &[]);
    let (b, _) = built(9, &[]);
    assert_eq!(encode_index(&a).unwrap(), encode_index(&b).unwrap());
}

#[test]
fn excluded_tables_contribute_nothing() {
    let (index, corpus) = built(3, &["T000", "T010"]);
    assert!(index.table_idx("T000").is_none() && index.table_idx("T010").is_none());
    assert_eq!(index.n_tables(), corpus.len() - 2);
    for e in corpus.iter().find(|t| t.id == "T000").unwrap().leftmost_entities() {
        assert!(index.tables_with_entity(e).all(|t| t != "T000"));
    }
}

#[test]
fn tampering_is_detected() {
    let (index, _) = built(4, &[]);
    let dir = tempfile::tempdir().unwrap();
    save_index(dir.path(), &index, &IndexManifest::new(&index, String::new(), String::new(), String::new())).unwrap();
    let path = dir.path().join("index.bin");
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x55;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_index(dir.path()), Err(PersistError::Checksum)));
}

#[test]
fn foreign_and_future_files_are_rejected() {
    let (index, _) = built(4, &[]);
    let bytes = encode_index(&index).unwrap();
    assert!(matches!(decode_index(b"not an index at all"), Err(PersistError::BadMagic)));
    let mut future = bytes.clone();
    future[8..12].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    assert!(matches!(decode_index(&future), Err(PersistError::Version { .. })));
    assert!(decode_index(&bytes[..bytes.len() / 3]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn corrupted_images_fail_cleanly(flips in proptest::collection::vec((any::<prop::sample::Index>(), 1u8..=255), 1..6)) {
        let (index, _) = built(4, &[]);
        let mut bytes = encode_index(&index).unwrap();
        let n = bytes.len();
        for (at, mask) in flips {
            bytes[12 + at.index(n - 12)] ^= mask;
        }
        if let Ok(decoded) = decode_index(&bytes) {
            prop_assert!(decoded.check_consistency().is_ok());
            let q = ["w1x2".to_string()];
            let _ = decoded.search(SearchField::Caption, &q, 5);
        }
    }
}
