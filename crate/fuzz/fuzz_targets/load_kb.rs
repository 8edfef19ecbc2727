#![no_main]

use libfuzzer_sys::fuzz_target;
use tabassist_core::kb::load_kb;

fuzz_target!(|data: &[u8]| {
    let Ok(loaded) = load_kb(data) else { return };
    let kb = loaded.store;
    for r in kb.records() {
        assert_eq!(kb.get(&r.id).map(|x| &x.id), Some(&r.id));
    }
    assert!(kb.mean_abstract_len().is_finite());
});
