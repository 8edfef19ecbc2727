#![no_main]

use libfuzzer_sys::fuzz_target;
use tabassist_core::table::{read_corpus, write_corpus};

fuzz_target!(|data: &[u8]| {
    let Ok(parsed) = read_corpus(data) else { return };
    for t in &parsed.tables {
        assert!(t.check_shape().is_ok());
    }
    // Accepted tables survive a write/read round trip unchanged.
    let mut out = Vec::new();
    write_corpus(&mut out, &parsed.tables).unwrap();
    let again = read_corpus(out.as_slice()).unwrap();
    assert!(again.errors.is_empty());
    assert_eq!(again.tables, parsed.tables);
});
