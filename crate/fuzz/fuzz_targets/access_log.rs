#![no_main]

use bob_url::dataset::parse_access_log;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let loaded = parse_access_log(text, "fuzz");
    assert!(loaded.dataset.entries.iter().all(|e| e.timestamp.is_some()));
});
