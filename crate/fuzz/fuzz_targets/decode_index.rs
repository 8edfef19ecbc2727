#![no_main]

use libfuzzer_sys::fuzz_target;
use tabassist_core::index::{decode_index, encode_index, SearchField};

fuzz_target!(|data: &[u8]| {
    let Ok(index) = decode_index(data) else { return };
    assert!(index.check_consistency().is_ok());
    let q = ["a".to_string()];
    for field in [SearchField::Caption, SearchField::Entities, SearchField::Labels] {
        let _ = index.search(field, &q, 8);
    }
    assert_eq!(decode_index(&encode_index(&index).unwrap()).unwrap(), index);
});
