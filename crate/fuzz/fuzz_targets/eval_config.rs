#![no_main]

use libfuzzer_sys::fuzz_target;
use tabassist_core::eval::{parse_sweep, EvalConfig, Task};

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = serde_json::from_slice::<EvalConfig>(data) {
        let _ = cfg.validate(Task::Rows);
        let _ = cfg.validate(Task::Columns);
    }
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(sweep) = parse_sweep(text) {
            assert!(!sweep.values.is_empty());
            assert!(sweep.values.windows(2).all(|w| w[0] < w[1]));
        }
    }
});
