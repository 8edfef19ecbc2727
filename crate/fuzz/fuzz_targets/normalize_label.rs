#![no_main]

use libfuzzer_sys::fuzz_target;
use tabassist_core::normalize_label;
use tabassist_core::text::tokenize;

fuzz_target!(|raw: &str| {
    let once = normalize_label(raw);
    assert_eq!(normalize_label(once.as_str()), once);
    for t in tokenize(raw) {
        assert!(!t.is_empty());
    }
});
