#![no_main]

use libfuzzer_sys::fuzz_target;
use tabassist_core::SeedTable;

fuzz_target!(|data: &[u8]| {
    let Ok(seed) = serde_json::from_slice::<SeedTable>(data) else { return };
    let _ = seed.validate();
    let labels = seed.normalized_labels();
    assert!(labels.iter().all(|l| !l.is_empty()));
    let back: SeedTable = serde_json::from_str(&serde_json::to_string(&seed).unwrap()).unwrap();
    assert_eq!(back, seed);
});
