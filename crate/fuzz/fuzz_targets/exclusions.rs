#![no_main]

use libfuzzer_sys::fuzz_target;
use tabassist_core::pipeline::parse_exclusions;

fuzz_target!(|text: &str| {
    if let Ok(ids) = parse_exclusions(text) {
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }
});
