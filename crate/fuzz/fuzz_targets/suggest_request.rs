#![no_main]

use libfuzzer_sys::fuzz_target;
use tabassist_core::eval::Task;
use tabassist_service::{plan, SuggestRequest, DEFAULT_TOP_K_CAP};

fuzz_target!(|data: &[u8]| {
    let Ok(req) = serde_json::from_slice::<SuggestRequest>(data) else { return };
    for task in [Task::Rows, Task::Columns] {
        if let Ok(p) = plan(task, &req, DEFAULT_TOP_K_CAP) {
            assert_eq!(p.task(), task);
        }
    }
});
