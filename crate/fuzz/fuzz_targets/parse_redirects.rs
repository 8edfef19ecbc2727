#![no_main]

use libfuzzer_sys::fuzz_target;
use tabassist_core::kb::parse_redirects;

fuzz_target!(|data: &[u8]| {
    let (redirects, _) = parse_redirects(data).unwrap();
    // Resolution terminates even on cyclic input.
    for line in String::from_utf8_lossy(data).lines().take(64) {
        if let Some((from, _)) = line.split_once('\t') {
            let _ = redirects.resolve(from);
        }
    }
});
