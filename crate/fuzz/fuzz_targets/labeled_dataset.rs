#![no_main]

use bob_url::dataset::{parse_labeled, write_labeled};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let Ok(d) = parse_labeled(text, "fuzz") else { return };
    let mut out = Vec::new();
    if write_labeled(&d, &mut out).is_ok() {
        let again = parse_labeled(std::str::from_utf8(&out).unwrap(), "fuzz").unwrap();
        assert_eq!(again.entries, d.entries);
    }
});
