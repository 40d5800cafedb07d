#![no_main]

use bob_url::vectorizer::{extract_bytes, split_url, vectorize};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(parsed) = split_url(data) else {
        assert!(data.is_empty());
        return;
    };
    assert_eq!(parsed.reassemble(), data);
    assert_eq!(extract_bytes(data).len(), 2 * data.len() - 1);
    let v = vectorize(data).unwrap();
    for (half, part) in [(v.host_half(), parsed.host), (v.path_half(), parsed.path)] {
        let norm: f64 = half.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(if part.is_empty() { norm == 0.0 } else { (norm - 1.0).abs() < 1e-9 });
    }
});
