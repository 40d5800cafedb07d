#![no_main]

use bob_url::dataset::{parse_url_list, Label};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let d = parse_url_list(text, Label::Benign, "fuzz");
    assert!(d.entries.iter().all(|e| !e.url.contains('\n')));
});
