#![no_main]

use bob_url::dataset::{parse_phishtank_csv, Label};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(loaded) = parse_phishtank_csv(data, "fuzz") {
        assert!(loaded.dataset.entries.iter().all(|e| e.label == Label::Malicious && !e.url.is_empty()));
    }
});
